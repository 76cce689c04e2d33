//! Eyring-Kramers predictions for the isa and for overdamped Langevin.
//!
//! A prediction keeps the structural split `prefactor * exp(rate / temperature)
//! + phi` instead of a single number, so rates can be compared without
//! trusting the unquantified additive constants.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gibbs::TemperaturePair;
use crate::landscape::Landscape;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KramersError {
    #[error("phi_n needs x >= 1 and n >= 1, got n = {n}, x = {x}")]
    DomainError { n: usize, x: f64 },
    #[error("Hessian at {0} has zero determinant")]
    SingularHessian(String),
    #[error("minimum index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("assumption violated: {0}")]
    AssumptionViolation(String),
    #[error("schedule too fast: E = {e} must exceed E*/K = {limit}")]
    ScheduleTooFast { e: f64, limit: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionKind {
    Poincare,
    Lsi,
    LangevinPoincare,
}

/// An assembled bound `1/rho` (Poincare) or `2/alpha` (log-Sobolev).
///
/// `bound_value = prefactor * exp(exponent_rate / effective_temperature) + phi_correction`.
/// The band multiplies only the leading term by `1 -+ c sqrt(tau) |ln tau|^{3/2}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EKPrediction {
    pub kind: PredictionKind,
    #[serde(rename = "prefactor")]
    pub prefactor: f64,
    #[serde(rename = "rate")]
    pub exponent_rate: f64,
    #[serde(rename = "temperature")]
    pub effective_temperature: f64,
    #[serde(rename = "phi")]
    pub phi_correction: f64,
    #[serde(rename = "bound")]
    pub bound_value: f64,
    pub band_low: f64,
    pub band_high: f64,
}

impl EKPrediction {
    /// `prefactor * exp(rate / temperature)`.
    pub fn leading(&self) -> f64 {
        self.prefactor * (self.exponent_rate / self.effective_temperature).exp()
    }

    /// Spectral gap (or LSI constant) implied by the bound.
    pub fn implied_rate(&self) -> f64 {
        match self.kind {
            PredictionKind::Lsi => 2.0 / self.bound_value,
            _ => 1.0 / self.bound_value,
        }
    }
}

/// Tunable constants the asymptotic statements leave open.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionConstants {
    pub phi_weight: f64,
    pub band_constant: f64,
}

impl Default for PredictionConstants {
    fn default() -> Self {
        Self {
            phi_weight: 1.0,
            band_constant: 1.0,
        }
    }
}

/// `1` for `n = 1`, `1 + ln x` for `n = 2`, `1 + x^{(n-2)/2}` for `n >= 3`.
pub fn phi_n(n: usize, x: f64) -> Result<f64, KramersError> {
    if n == 0 || !(x >= 1.0) || !x.is_finite() {
        return Err(KramersError::DomainError { n, x });
    }
    Ok(match n {
        1 => 1.0,
        2 => 1.0 + x.ln(),
        _ => 1.0 + x.powf(0.5 * (n as f64 - 2.0)),
    })
}

/// `sqrt(tau) |ln tau|^{3/2}`, the relative size of the leading-order error.
pub fn band_width(tau: f64) -> f64 {
    tau.sqrt() * tau.ln().abs().powf(1.5)
}

fn check_pair(l: &Landscape, k: usize, j: usize) -> Result<(), KramersError> {
    let n = l.n_minima();
    if k >= n || j >= n || k == j {
        return Err(KramersError::IndexOutOfRange(format!(
            "pair ({k}, {j}) with {n} minima"
        )));
    }
    Ok(())
}

/// Determinant/eigenvalue factor `2 pi sqrt|det Hess H(s)| / (|lambda-| sqrt det Hess H(m_k))`.
///
/// In one dimension `|det Hess H(s)| = |H''(s)|` and `lambda- = H''(s)`.
pub fn transport_factor(l: &Landscape, k: usize, j: usize) -> Result<f64, KramersError> {
    check_pair(l, k, j)?;
    let m = &l.minima[k];
    let s = &l.saddles[k][j].saddle;
    curvature_factor(m.abs_det(), s.abs_det(), s.lambda_minus())
        .map_err(|_| KramersError::SingularHessian(format!("minimum {k} or saddle ({k}, {j})")))
}

/// `2 pi sqrt(det_saddle) / (|lambda_minus| sqrt(det_min))` from raw curvature data.
pub fn curvature_factor(det_min: f64, det_saddle: f64, lambda_minus: f64) -> Result<f64, KramersError> {
    let lam = lambda_minus.abs();
    if !(det_min > 0.0 && det_saddle > 0.0 && lam > 0.0) {
        return Err(KramersError::SingularHessian(format!(
            "det_min = {det_min}, det_saddle = {det_saddle}, lambda- = {lambda_minus}"
        )));
    }
    Ok(2.0 * std::f64::consts::PI * det_saddle.sqrt() / (lam * det_min.sqrt()))
}

/// `C_kj^tau = transport_factor * exp((H(s_kj) - H(m_k)) / tau)`.
pub fn transport_prefactor(l: &Landscape, k: usize, j: usize, tau: f64) -> Result<f64, KramersError> {
    let f = transport_factor(l, k, j)?;
    let depth = l.saddles[k][j].height - l.minima[k].value;
    Ok(f * (depth / tau).exp())
}

fn critical_pair(l: &Landscape) -> Result<(usize, f64), KramersError> {
    if l.n_minima() < 2 {
        return Err(KramersError::AssumptionViolation(
            "need at least two minima".into(),
        ));
    }
    if !(l.e_star > 0.0) {
        return Err(KramersError::AssumptionViolation(format!(
            "critical depth {} is not positive",
            l.e_star
        )));
    }
    Ok((l.p, l.e_star))
}

fn assemble(
    kind: PredictionKind,
    prefactor: f64,
    rate: f64,
    temperature: f64,
    phi: f64,
    band_constant: f64,
) -> EKPrediction {
    let leading = prefactor * (rate / temperature).exp();
    let u = band_constant * band_width(temperature);
    EKPrediction {
        kind,
        prefactor,
        exponent_rate: rate,
        effective_temperature: temperature,
        phi_correction: phi,
        bound_value: leading + phi,
        band_low: leading * (1.0 - u).max(0.0) + phi,
        band_high: leading * (1.0 + u) + phi,
    }
}

/// Poincare bound `1/rho <= C_p1^{tau2} + w Phi_n(tau2/tau1)` for the isa.
pub fn poincare_bound(
    l: &Landscape,
    t: &TemperaturePair,
    c: &PredictionConstants,
) -> Result<EKPrediction, KramersError> {
    let (p, e_star) = critical_pair(l)?;
    let factor = transport_factor(l, p, 0)?;
    let phi = c.phi_weight * phi_n(l.dim(), t.ratio())?;
    Ok(assemble(PredictionKind::Poincare, factor, e_star, t.tau2, phi, c.band_constant))
}

/// Log-Sobolev bound
/// `2/alpha <= 2 N^2 (H(m_p)/tau1 + H(m_p)/tau2) C_p1^{tau2} + w Phi_n(tau2/tau1) / tau1`.
pub fn lsi_bound(
    l: &Landscape,
    t: &TemperaturePair,
    c: &PredictionConstants,
) -> Result<EKPrediction, KramersError> {
    let (p, e_star) = critical_pair(l)?;
    let hp = l.minima[p].value;
    if !(hp > 0.0) {
        return Err(KramersError::AssumptionViolation(format!(
            "dominating minimum has energy {hp} above the global minimum"
        )));
    }
    let n = l.n_minima() as f64;
    let factor = transport_factor(l, p, 0)?;
    let weight = 2.0 * n * n * (hp / t.tau1 + hp / t.tau2);
    let phi = c.phi_weight * phi_n(l.dim(), t.ratio())? / t.tau1;
    Ok(assemble(PredictionKind::Lsi, weight * factor, e_star, t.tau2, phi, c.band_constant))
}

/// Poincare bound `1/rho <= C_p1^tau` for overdamped Langevin at one temperature.
pub fn langevin_poincare_bound(
    l: &Landscape,
    tau: f64,
    c: &PredictionConstants,
) -> Result<EKPrediction, KramersError> {
    if !(tau > 0.0) {
        return Err(KramersError::InvalidArgument(format!("tau = {tau}")));
    }
    let (p, e_star) = critical_pair(l)?;
    let factor = transport_factor(l, p, 0)?;
    Ok(assemble(PredictionKind::LangevinPoincare, factor, e_star, tau, 0.0, c.band_constant))
}

/// Predicted gap ratio of the isa at `(tau1, tau2)` over Langevin at `tau1`.
pub fn speedup_ratio(isa: &EKPrediction, langevin: &EKPrediction) -> f64 {
    langevin.bound_value / isa.bound_value
}

/// Annealing exponent `min(delta/E, 1/2 - E*/(2 K E))`.
pub fn sa_exponent(e: f64, k: f64, e_star: f64, delta: f64) -> Result<f64, KramersError> {
    if !(k > 1.0 && delta > 0.0 && e_star >= 0.0) {
        return Err(KramersError::InvalidArgument(format!(
            "K = {k}, delta = {delta}, E* = {e_star}"
        )));
    }
    let limit = e_star / k;
    if !(e > limit) {
        return Err(KramersError::ScheduleTooFast { e, limit });
    }
    Ok((delta / e).min(0.5 - e_star / (2.0 * k * e)))
}
