//! Finite-volume discretizations of the Langevin and isa Dirichlet forms,
//! spectral gaps, variational quotients and explicit test functions.
//!
//! Forms live on tensor grids with reflecting boundaries. The spectral gap is
//! the smallest nonzero eigenvalue of `A f = lambda M f`, solved densely on
//! small grids and by grounded inverse subspace iteration on large ones.

mod banded;
mod eigen;
mod form;
mod grid;
mod quotient;
mod testfn;

use thiserror::Error;

use crate::gibbs::GibbsError;

pub use banded::BandCholesky;
pub use eigen::{spectral_gap, spectral_gap_with, EigenOptions, GapReport, SolverMethod};
pub use form::{
    assemble_isa_form, assemble_isa_form_with, assemble_langevin_form, assemble_langevin_form_with,
    assemble_marginal_form, DiscreteForm, Edge, FormKind, FormOptions, DEFAULT_MAX_NODES,
    LOG_MASS_FLOOR,
};
pub use grid::Grid;
pub use quotient::{entropy, entropy_quotient, rayleigh_quotient, DEGENERATE_TOL};
pub use testfn::{
    ansatz_1d, lower_bound_testfn, radius_half, Ansatz1d, AnsatzOptions, DeltaRule, HShape,
    LowerBoundTestFn, SigmaRule, TestFnOptions,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid has {nodes} nodes, above the cap of {cap}")]
    GridTooLarge { nodes: usize, cap: usize },
    #[error(transparent)]
    Gibbs(#[from] GibbsError),
    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("denominator {0:e} is numerically zero")]
    DegenerateDenominator(f64),
    #[error("wrong landscape topology: {0}")]
    WrongTopology(String),
    #[error("temperature ratio {ratio} is not resolvable: smallest scale spans {cells:.2} cells")]
    RatioTooLarge { ratio: f64, cells: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
