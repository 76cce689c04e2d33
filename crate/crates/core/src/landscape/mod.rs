//! Energy landscapes and their critical-point structure.
//!
//! A [`Landscape`] catalogs the local minima of a Morse potential, the
//! communicating saddle between every pair of minima, and the critical depth
//! `E* = H(s_p1) - H(m_p)` that controls the slowest relaxation. Minima are
//! indexed from zero: index 0 is the unique global minimum.

mod build;
mod corpus;
mod critical;
mod potential;
mod saddle;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use build::{admissible_partition_1d, build_landscape, Landscape, LandscapeOptions, PartitionInterval, SaddleEntry};
pub use corpus::{corpus_potential, CORPUS_IDS};
pub use critical::{find_critical_points, newton_refine, CriticalPointOptions};
pub use potential::{
    gradient_fd_error, hessian_fd_error, DomainBox, GaussianBump, GaussianMixture,
    GrowthDeclaration, Monomial, PiecewisePolynomial, Polynomial, Potential, Scaled,
    SharedPotential, Shifted, Translated,
};
pub use saddle::{saddle_height_1d, saddle_height_nd, SaddleOptions, SaddleSearch};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LandscapeError {
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("unknown corpus potential `{0}`")]
    UnknownPotential(String),
    #[error("operation needs a {expected}-dimensional potential, got {got}")]
    WrongDimension { expected: String, got: usize },
    #[error("Hessian at {location:?} has eigenvalue {eigenvalue:e} below the Morse tolerance")]
    MorseViolation { location: Vec<f64>, eigenvalue: f64 },
    #[error("no local minimum found inside the domain box")]
    NoMinimum,
    #[error("no interior maximum between {a} and {b}")]
    NoSaddle { a: f64, b: f64 },
    #[error("saddle height between minima is attained at several points: {heights:?}")]
    NonUniqueSaddle { heights: Vec<f64> },
    #[error("Newton refinement near {location:?} did not reach an index-1 critical point")]
    RefinementFailed { location: Vec<f64> },
    #[error("global minimum is not unique: values {0} and {1}")]
    NonUniqueGlobalMin(f64, f64),
    #[error("landscape has a single minimum; Eyring-Kramers quantities need at least two")]
    NoBarrier,
    #[error("assumption violated: {0}")]
    AssumptionViolation(String),
}

/// Morse classification of a critical point by its Hessian index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalKind {
    Minimum,
    Saddle,
    Other,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub location: Vec<f64>,
    pub value: f64,
    /// Ascending.
    pub hess_eigenvalues: Vec<f64>,
    /// Row-major Hessian at `location`.
    pub hessian: Vec<f64>,
    pub index: usize,
    pub kind: CriticalKind,
}

impl CriticalPoint {
    /// Classify the point at `x`; no check that `x` is actually critical.
    pub fn at(p: &dyn Potential, x: &[f64]) -> Self {
        let n = p.dim();
        let hessian = p.hessian_vec(x);
        let m = nalgebra::DMatrix::from_row_slice(n, n, &hessian);
        let mut eig: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        let index = eig.iter().filter(|v| **v < 0.0).count();
        let kind = match index {
            0 => CriticalKind::Minimum,
            1 => CriticalKind::Saddle,
            _ => CriticalKind::Other,
        };
        Self {
            location: x.to_vec(),
            value: p.energy(x),
            hess_eigenvalues: eig,
            hessian,
            index,
            kind,
        }
    }

    /// `|det Hess|`, the product of absolute eigenvalues.
    pub fn abs_det(&self) -> f64 {
        self.hess_eigenvalues.iter().map(|v| v.abs()).product()
    }

    /// Most negative Hessian eigenvalue (`lambda^-` at a saddle).
    pub fn lambda_minus(&self) -> f64 {
        self.hess_eigenvalues[0]
    }

    pub fn min_abs_eigenvalue(&self) -> f64 {
        self.hess_eigenvalues
            .iter()
            .fold(f64::INFINITY, |m, v| m.min(v.abs()))
    }
}

/// Non-fatal findings recorded while building a landscape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "warning", rename_all = "snake_case")]
pub enum LandscapeWarning {
    GrowthNotDeclared { poincare: bool, log_sobolev: bool },
    SaddleNotRefined { pair: (usize, usize), grid_height: f64 },
    SaddleNotCritical { pair: (usize, usize) },
}
