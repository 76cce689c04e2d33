//! Infinite swapping, parallel tempering and overdamped Langevin dynamics on
//! user-defined energy landscapes, with Eyring-Kramers predictions and
//! discretized-generator spectral checks.

pub mod dynamics;
pub mod gibbs;
pub mod kramers;
pub mod landscape;
pub mod spectral;

pub use dynamics::{ChainState, DynamicsError, Sampler, SamplerKind, Schedule, SdeConfig, Trajectory};
pub use gibbs::{TemperaturePair, WeightEval};
pub use kramers::{EKPrediction, PredictionConstants, PredictionKind};
pub use landscape::{build_landscape, corpus_potential, Landscape, LandscapeOptions, Potential, SharedPotential};
pub use spectral::{DiscreteForm, GapReport, Grid};
