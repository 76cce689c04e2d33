//! Gibbs densities, the swapped product measures `pi+ / pi-`, the symmetric
//! isa invariant measure `mu = (pi+ + pi-) / 2`, swap weights `rho+-` and the
//! state-dependent diffusion coefficients `a1, a2`.
//!
//! Everything is kept in log space. `exp(-H / tau1)` underflows long before
//! the temperatures of interest, so probabilities are only ever formed after
//! normalizing on a finite grid.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::landscape::{Landscape, Potential};
use crate::spectral::Grid;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GibbsError {
    #[error("invalid temperatures: {0}")]
    InvalidTemperature(String),
    #[error("energy is not finite at {0:?}")]
    NonFiniteEnergy(Vec<f64>),
    #[error("all grid masses underflow to zero")]
    Underflow,
    #[error("grids do not match: {0}")]
    GridMismatch(String),
    #[error("Hessian determinant {0:e} at the minimum is not positive")]
    SingularHessian(f64),
    #[error("minimum index {index} out of range for {len} minima")]
    IndexOutOfRange { index: usize, len: usize },
}

/// Default lower bound on `tau2 / tau1`.
pub const K_MIN: f64 = 1.0 + 1e-9;

/// Cold and hot temperature, `tau2 >= K tau1` with `K > 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemperaturePair {
    pub tau1: f64,
    pub tau2: f64,
}

impl TemperaturePair {
    pub fn new(tau1: f64, tau2: f64) -> Result<Self, GibbsError> {
        Self::with_min_ratio(tau1, tau2, K_MIN)
    }

    pub fn with_min_ratio(tau1: f64, tau2: f64, k_min: f64) -> Result<Self, GibbsError> {
        if !(tau1 > 0.0 && tau1.is_finite() && tau2.is_finite()) {
            return Err(GibbsError::InvalidTemperature(format!(
                "tau1 = {tau1}, tau2 = {tau2}"
            )));
        }
        if !(tau2 >= k_min * tau1) {
            return Err(GibbsError::InvalidTemperature(format!(
                "tau2 = {tau2} is below {k_min} * tau1 = {}",
                k_min * tau1
            )));
        }
        Ok(Self { tau1, tau2 })
    }

    /// `tau2 = K tau1`.
    pub fn from_ratio(tau1: f64, k: f64) -> Result<Self, GibbsError> {
        Self::new(tau1, k * tau1)
    }

    /// Both temperatures equal. Outside the `K > 1` regime; the isa then
    /// reduces to two independent Langevin chains.
    pub fn equal(tau: f64) -> Self {
        Self { tau1: tau, tau2: tau }
    }

    pub fn ratio(&self) -> f64 {
        self.tau2 / self.tau1
    }
}

/// Swap weights and diffusion coefficients at one state `(x1, x2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightEval {
    pub log_pi_plus: f64,
    pub log_pi_minus: f64,
    pub rho_plus: f64,
    pub rho_minus: f64,
    pub a1: f64,
    pub a2: f64,
}

/// Weights from the two energies `H(x1), H(x2)`.
///
/// With `r = (H2 - H1)(1/tau1 - 1/tau2)`, `rho+ = 1 / (1 + e^-r)`. The smaller
/// weight is computed as `e^-|r| / (1 + e^-|r|)` and the larger as its
/// complement, so the pair sums to exactly 1 and swapping the energies swaps
/// the weights bit for bit. The coefficient of the particle carrying the
/// smaller weight on its hot role is `tau1 + (tau2 - tau1) * small`, the other
/// is `tau2 - (tau2 - tau1) * small`; both are clamped to `[tau1, tau2]`.
#[inline]
pub fn weights_from_energies(t: &TemperaturePair, h1: f64, h2: f64) -> WeightEval {
    let (b1, b2) = (1.0 / t.tau1, 1.0 / t.tau2);
    let log_pi_plus = -h1 * b1 - h2 * b2;
    let log_pi_minus = -h1 * b2 - h2 * b1;
    let r = (h2 - h1) * (b1 - b2);
    let e = (-r.abs()).exp();
    let small = e / (1.0 + e);
    let large = 1.0 - small;
    let spread = t.tau2 - t.tau1;
    let near_cold = (t.tau1 + spread * small).clamp(t.tau1, t.tau2);
    let near_hot = (t.tau2 - spread * small).clamp(t.tau1, t.tau2);
    // r >= 0: x1 is the deeper particle, rho+ is the large weight.
    let (rho_plus, rho_minus, a1, a2) = if r >= 0.0 {
        (large, small, near_cold, near_hot)
    } else {
        (small, large, near_hot, near_cold)
    };
    WeightEval {
        log_pi_plus,
        log_pi_minus,
        rho_plus,
        rho_minus,
        a1,
        a2,
    }
}

fn energy_checked(p: &dyn Potential, x: &[f64]) -> Result<f64, GibbsError> {
    let h = p.energy(x);
    if h.is_finite() {
        Ok(h)
    } else {
        Err(GibbsError::NonFiniteEnergy(x.to_vec()))
    }
}

pub fn weight_eval(
    p: &dyn Potential,
    t: &TemperaturePair,
    x1: &[f64],
    x2: &[f64],
) -> Result<WeightEval, GibbsError> {
    let h1 = energy_checked(p, x1)?;
    let h2 = energy_checked(p, x2)?;
    Ok(weights_from_energies(t, h1, h2))
}

/// `ln(e^a + e^b)`, exactly symmetric in its arguments.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + (-(a - b).abs()).exp().ln_1p()
}

#[inline]
pub fn log_mu_from_energies(t: &TemperaturePair, h1: f64, h2: f64) -> f64 {
    let (b1, b2) = (1.0 / t.tau1, 1.0 / t.tau2);
    log_add_exp(-h1 * b1 - h2 * b2, -h1 * b2 - h2 * b1) - std::f64::consts::LN_2
}

/// Unnormalized `ln mu(x1, x2)`.
pub fn log_mu(
    p: &dyn Potential,
    t: &TemperaturePair,
    x1: &[f64],
    x2: &[f64],
) -> Result<f64, GibbsError> {
    let h1 = energy_checked(p, x1)?;
    let h2 = energy_checked(p, x2)?;
    Ok(log_mu_from_energies(t, h1, h2))
}

/// Leading Laplace term `(2 pi tau)^{n/2} / sqrt(det Hess H(m_i)) * exp(-H(m_i) / tau)`
/// of the partition sum over the basin of minimum `i`.
pub fn gaussian_partition(l: &Landscape, tau: f64, i: usize) -> Result<f64, GibbsError> {
    let m = l.minima.get(i).ok_or(GibbsError::IndexOutOfRange {
        index: i,
        len: l.n_minima(),
    })?;
    let det: f64 = m.hess_eigenvalues.iter().product();
    if !(det > 0.0) {
        return Err(GibbsError::SingularHessian(det));
    }
    let n = m.location.len() as f64;
    Ok((2.0 * std::f64::consts::PI * tau).powf(0.5 * n) / det.sqrt() * (-m.value / tau).exp())
}

/// Normalize `exp(log_w) * volume` node weights to probabilities.
pub(crate) fn normalize_log_weights(log_w: &[f64]) -> Result<Vec<f64>, GibbsError> {
    let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(GibbsError::Underflow);
    }
    let mut w: Vec<f64> = log_w.iter().map(|v| (v - top).exp()).collect();
    let total: f64 = w.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(GibbsError::Underflow);
    }
    w.iter_mut().for_each(|v| *v /= total);
    Ok(w)
}

/// Node energies for an n-dimensional grid.
pub(crate) fn grid_energies(p: &dyn Potential, grid: &Grid) -> Result<Vec<f64>, GibbsError> {
    if grid.dim() != p.dim() {
        return Err(GibbsError::GridMismatch(format!(
            "grid has {} axes, potential has dimension {}",
            grid.dim(),
            p.dim()
        )));
    }
    let mut x = vec![0.0; grid.dim()];
    (0..grid.len())
        .map(|i| {
            grid.node(i, &mut x);
            energy_checked(p, &x)
        })
        .collect()
}

/// Node masses of the Gibbs measure `nu^tau` on an n-dimensional grid.
pub fn grid_density_gibbs(
    p: &dyn Potential,
    tau: f64,
    grid: &Grid,
) -> Result<Vec<f64>, GibbsError> {
    let h = grid_energies(p, grid)?;
    let log_w: Vec<f64> = h
        .iter()
        .enumerate()
        .map(|(i, e)| -e / tau + grid.cell_volume(i).ln())
        .collect();
    normalize_log_weights(&log_w)
}

/// Unnormalized `ln mu` at every node of a `2n`-dimensional product grid.
pub(crate) fn grid_log_mu(
    p: &dyn Potential,
    t: &TemperaturePair,
    grid: &Grid,
) -> Result<Vec<f64>, GibbsError> {
    let n = p.dim();
    if grid.dim() != 2 * n {
        return Err(GibbsError::GridMismatch(format!(
            "isa grid needs {} axes, got {}",
            2 * n,
            grid.dim()
        )));
    }
    let mut x = vec![0.0; 2 * n];
    (0..grid.len())
        .map(|i| {
            grid.node(i, &mut x);
            let h1 = energy_checked(p, &x[..n])?;
            let h2 = energy_checked(p, &x[n..])?;
            Ok(log_mu_from_energies(t, h1, h2))
        })
        .collect()
}

/// Node masses of `mu` on a `2n`-dimensional grid whose first `n` axes carry
/// `x1` and last `n` carry `x2`.
pub fn grid_density_mu(
    p: &dyn Potential,
    t: &TemperaturePair,
    grid: &Grid,
) -> Result<Vec<f64>, GibbsError> {
    let lm = grid_log_mu(p, t, grid)?;
    let log_w: Vec<f64> = lm
        .iter()
        .enumerate()
        .map(|(i, v)| v + grid.cell_volume(i).ln())
        .collect();
    normalize_log_weights(&log_w)
}

/// Total variation `1/2 sum |a - b|` between two histograms on the same bins.
pub fn tv_distance(a: &[f64], b: &[f64]) -> Result<f64, GibbsError> {
    if a.len() != b.len() {
        return Err(GibbsError::GridMismatch(format!(
            "histograms have {} and {} bins",
            a.len(),
            b.len()
        )));
    }
    Ok(0.5 * a.iter().zip(b).map(|(u, v)| (u - v).abs()).sum::<f64>())
}
