//! Euler-Maruyama integration of overdamped Langevin dynamics, the two
//! parallel tempering variants and the infinite swapping process, together
//! with annealing drivers and ergodic-average diagnostics.
//!
//! Every chain draws its noise from counter-based streams keyed by
//! `(seed, chain id, block)`, so replicas are reproducible regardless of how
//! they are scheduled on threads.

mod anneal;
mod chain;
mod deviation;
mod histogram;
mod rng;
mod stats;
mod steppers;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gibbs::{GibbsError, TemperaturePair};
use crate::kramers::KramersError;

pub use anneal::{anneal_isa, anneal_langevin, AnnealOutcome};
pub use chain::{
    run_chain, run_chain_observed, Counters, Observable, Record, SdeConfig, Trajectory,
    TrajectorySummary,
};
pub use deviation::{
    ergodic_deviation, DeviationConfig, DeviationPoint, DeviationReport, InitialLaw, MuSampler,
};
pub use histogram::Histogram;
pub use rng::{stream, NoiseSource, StreamNoise, ZeroNoise, BLOCK_INIT, BLOCK_JUMPS, BLOCK_PARTICLE_1, BLOCK_PARTICLE_2};
pub use stats::{binomial_upper_tail, sign_test, wilson_interval};
pub use steppers::{
    step_isa, step_langevin, step_pt_position, step_pt_temperature, Sampler, SamplerKind,
    StepInfo, Workspace,
};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("step explosion at t = {t}: {reason}; reduce dt")]
    StepExplosion { t: f64, reason: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Gibbs(#[from] GibbsError),
    #[error(transparent)]
    Kramers(#[from] KramersError),
}

/// State of one chain. Langevin chains use `x1` only and leave `x2` empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    /// Temperature label of the temperature-swap process; 0 means `x1` is cold.
    pub z: u8,
    pub t: f64,
}

impl ChainState {
    pub fn single(x: Vec<f64>) -> Self {
        Self {
            x1: x,
            x2: Vec::new(),
            z: 0,
            t: 0.0,
        }
    }

    pub fn pair(x1: Vec<f64>, x2: Vec<f64>) -> Self {
        Self {
            x1,
            x2,
            z: 0,
            t: 0.0,
        }
    }

    /// Coordinates exchanged, label flipped.
    pub fn swapped(&self) -> Self {
        Self {
            x1: self.x2.clone(),
            x2: self.x1.clone(),
            z: 1 - self.z,
            t: self.t,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x1.iter().chain(&self.x2).all(|v| v.is_finite()) && self.t.is_finite()
    }
}

/// Temperatures as a function of elapsed simulated time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Schedule {
    Frozen { tau1: f64, tau2: f64 },
    /// `tau1(t) = e / ln(2 + t)`, `tau2(t) = k tau1(t)`.
    Logarithmic { e: f64, k: f64 },
}

impl Schedule {
    pub fn frozen(t: TemperaturePair) -> Self {
        Schedule::Frozen {
            tau1: t.tau1,
            tau2: t.tau2,
        }
    }

    pub fn logarithmic(e: f64, k: f64) -> Result<Self, DynamicsError> {
        if !(e > 0.0 && e.is_finite() && k >= 1.0 && k.is_finite()) {
            return Err(DynamicsError::InvalidConfig(format!(
                "logarithmic schedule needs E > 0 and K >= 1, got E = {e}, K = {k}"
            )));
        }
        Ok(Schedule::Logarithmic { e, k })
    }

    pub fn at(&self, t: f64) -> TemperaturePair {
        match *self {
            Schedule::Frozen { tau1, tau2 } => TemperaturePair { tau1, tau2 },
            Schedule::Logarithmic { e, k } => {
                let tau1 = e / (2.0 + t).ln();
                TemperaturePair { tau1, tau2: k * tau1 }
            }
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        match *self {
            Schedule::Frozen { tau1, tau2 } => {
                if !(tau1 >= 0.0 && tau2 >= tau1 && tau2.is_finite()) {
                    return Err(DynamicsError::InvalidConfig(format!(
                        "frozen temperatures need 0 <= tau1 <= tau2, got {tau1}, {tau2}"
                    )));
                }
                Ok(())
            }
            Schedule::Logarithmic { e, k } => Self::logarithmic(e, k).map(|_| ()),
        }
    }
}
