use serde::{Deserialize, Serialize};

use super::{ChainState, DynamicsError, NoiseSource, Schedule};
use crate::gibbs::{weights_from_energies, TemperaturePair, WeightEval};
use crate::landscape::{Potential, SharedPotential};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Langevin,
    Isa,
    PtPosition,
    PtTemperature,
}

impl SamplerKind {
    pub fn particles(self) -> usize {
        match self {
            SamplerKind::Langevin => 1,
            _ => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Langevin => "langevin",
            SamplerKind::Isa => "isa",
            SamplerKind::PtPosition => "pt_position",
            SamplerKind::PtTemperature => "pt_temperature",
        }
    }
}

/// Gradient and noise buffers plus the blow-up guard of one chain.
#[derive(Clone, Debug)]
pub struct Workspace {
    g1: Vec<f64>,
    g2: Vec<f64>,
    xi1: Vec<f64>,
    xi2: Vec<f64>,
    cap: f64,
    centre: Vec<f64>,
    reach: Vec<f64>,
}

impl Workspace {
    /// `stability_cap` bounds `dt |grad H|`; defaults to half the box diameter.
    pub fn new(p: &dyn Potential, stability_cap: Option<f64>) -> Self {
        let n = p.dim();
        let d = p.domain();
        Self {
            g1: vec![0.0; n],
            g2: vec![0.0; n],
            xi1: vec![0.0; n],
            xi2: vec![0.0; n],
            cap: stability_cap.unwrap_or(0.5 * d.diameter()),
            centre: d.lo.iter().zip(&d.hi).map(|(a, b)| 0.5 * (a + b)).collect(),
            reach: d.lo.iter().zip(&d.hi).map(|(a, b)| 5.0 * (b - a)).collect(),
        }
    }

    fn check_drift(&self, dt: f64, g: &[f64], t: f64) -> Result<(), DynamicsError> {
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(dt * norm <= self.cap) {
            return Err(DynamicsError::StepExplosion {
                t,
                reason: format!("dt |grad H| = {:e} exceeds the stability cap {}", dt * norm, self.cap),
            });
        }
        Ok(())
    }

    fn check_position(&self, x: &[f64], t: f64) -> Result<(), DynamicsError> {
        for (k, v) in x.iter().enumerate() {
            if !((v - self.centre[k]).abs() <= self.reach[k]) {
                return Err(DynamicsError::StepExplosion {
                    t,
                    reason: format!("coordinate {k} = {v:e} left ten times the domain box"),
                });
            }
        }
        Ok(())
    }
}

#[inline]
fn advance(x: &mut [f64], g: &[f64], xi: &[f64], dt: f64, amp: f64) {
    for ((v, gk), n) in x.iter_mut().zip(g).zip(xi) {
        *v = *v - gk * dt + amp * n;
    }
}

/// One Euler-Maruyama step `x <- x - grad H dt + sqrt(2 tau dt) xi` of
/// `state.x1`, noise from block 0.
pub fn step_langevin(
    state: &mut ChainState,
    p: &dyn Potential,
    tau: f64,
    dt: f64,
    noise: &mut dyn NoiseSource,
    ws: &mut Workspace,
) -> Result<(), DynamicsError> {
    p.gradient(&state.x1, &mut ws.g1);
    ws.check_drift(dt, &ws.g1, state.t)?;
    noise.normals(0, &mut ws.xi1);
    advance(&mut state.x1, &ws.g1, &ws.xi1, dt, (2.0 * tau * dt).sqrt());
    state.t += dt;
    ws.check_position(&state.x1, state.t)
}

/// Diffuse `x1` at `c1` with block 0 and `x2` at `c2` with block 1.
fn diffuse_pair(
    state: &mut ChainState,
    p: &dyn Potential,
    c1: f64,
    c2: f64,
    dt: f64,
    noise: &mut dyn NoiseSource,
    ws: &mut Workspace,
) -> Result<(), DynamicsError> {
    p.gradient(&state.x1, &mut ws.g1);
    p.gradient(&state.x2, &mut ws.g2);
    ws.check_drift(dt, &ws.g1, state.t)?;
    ws.check_drift(dt, &ws.g2, state.t)?;
    noise.normals(0, &mut ws.xi1);
    noise.normals(1, &mut ws.xi2);
    advance(&mut state.x1, &ws.g1, &ws.xi1, dt, (2.0 * c1 * dt).sqrt());
    advance(&mut state.x2, &ws.g2, &ws.xi2, dt, (2.0 * c2 * dt).sqrt());
    state.t += dt;
    ws.check_position(&state.x1, state.t)?;
    ws.check_position(&state.x2, state.t)
}

/// One infinite swapping step. The weights are evaluated once, at the start
/// of the step, and returned.
pub fn step_isa(
    state: &mut ChainState,
    p: &dyn Potential,
    t: &TemperaturePair,
    dt: f64,
    noise: &mut dyn NoiseSource,
    ws: &mut Workspace,
) -> Result<WeightEval, DynamicsError> {
    let w = weights_from_energies(t, p.energy(&state.x1), p.energy(&state.x2));
    debug_assert!(w.a1 >= t.tau1 && w.a1 <= t.tau2 && w.a2 >= t.tau1 && w.a2 <= t.tau2);
    debug_assert!((w.a1 + w.a2 - (t.tau1 + t.tau2)).abs() <= 4.0 * f64::EPSILON * (t.tau1 + t.tau2));
    diffuse_pair(state, p, w.a1, w.a2, dt, noise, ws)?;
    Ok(w)
}

/// `1 - exp(-a g dt)` with `g = min(1, exp(log_ratio))`.
#[inline]
fn jump_probability(a: f64, log_ratio: f64, dt: f64) -> f64 {
    let g = log_ratio.min(0.0).exp();
    -(-a * g * dt).exp_m1()
}

/// `ln(pi- / pi+)` at `(x1, x2)`.
#[inline]
fn log_swap_ratio(p: &dyn Potential, t: &TemperaturePair, x1: &[f64], x2: &[f64]) -> f64 {
    (p.energy(x1) - p.energy(x2)) * (1.0 / t.tau1 - 1.0 / t.tau2)
}

/// Position-swap parallel tempering: diffuse at `(tau1, tau2)`, then exchange
/// the positions with probability `1 - exp(-a g dt)`. Returns whether a swap
/// happened. One uniform is consumed every step.
pub fn step_pt_position(
    state: &mut ChainState,
    p: &dyn Potential,
    t: &TemperaturePair,
    swap_rate: f64,
    dt: f64,
    noise: &mut dyn NoiseSource,
    ws: &mut Workspace,
) -> Result<bool, DynamicsError> {
    diffuse_pair(state, p, t.tau1, t.tau2, dt, noise, ws)?;
    let prob = jump_probability(swap_rate, log_swap_ratio(p, t, &state.x1, &state.x2), dt);
    let swap = noise.uniform() < prob;
    if swap {
        std::mem::swap(&mut state.x1, &mut state.x2);
    }
    Ok(swap)
}

/// Temperature-swap parallel tempering: diffuse at `(tau1, tau2)` when
/// `z = 0` and `(tau2, tau1)` when `z = 1`, then flip `z` with intensity
/// `a g(x1, x2)` or `a g(x2, x1)`. Returns whether the label flipped.
pub fn step_pt_temperature(
    state: &mut ChainState,
    p: &dyn Potential,
    t: &TemperaturePair,
    swap_rate: f64,
    dt: f64,
    noise: &mut dyn NoiseSource,
    ws: &mut Workspace,
) -> Result<bool, DynamicsError> {
    let (c1, c2) = if state.z == 0 { (t.tau1, t.tau2) } else { (t.tau2, t.tau1) };
    diffuse_pair(state, p, c1, c2, dt, noise, ws)?;
    let lr = log_swap_ratio(p, t, &state.x1, &state.x2);
    let lr = if state.z == 0 { lr } else { -lr };
    let flip = noise.uniform() < jump_probability(swap_rate, lr, dt);
    if flip {
        state.z = 1 - state.z;
    }
    Ok(flip)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepInfo {
    pub swapped: bool,
    pub flipped: bool,
}

/// A process, its potential and its temperature schedule.
#[derive(Clone, Debug)]
pub struct Sampler {
    pub kind: SamplerKind,
    pub potential: SharedPotential,
    pub schedule: Schedule,
    /// Jump rate `a` of the two tempering variants.
    pub swap_rate: f64,
    ws: Workspace,
}

impl Sampler {
    pub fn new(
        kind: SamplerKind,
        potential: SharedPotential,
        schedule: Schedule,
        swap_rate: f64,
        stability_cap: Option<f64>,
    ) -> Result<Self, DynamicsError> {
        schedule.validate()?;
        if kind != SamplerKind::Langevin && schedule.at(0.0).tau1 <= 0.0 {
            return Err(DynamicsError::InvalidConfig(format!(
                "{} needs a positive cold temperature",
                kind.name()
            )));
        }
        if !(swap_rate >= 0.0 && swap_rate.is_finite()) {
            return Err(DynamicsError::InvalidConfig(format!(
                "swap rate must be finite and nonnegative, got {swap_rate}"
            )));
        }
        if let Some(c) = stability_cap {
            if !(c > 0.0) {
                return Err(DynamicsError::InvalidConfig(format!("stability cap must be positive, got {c}")));
            }
        }
        let ws = Workspace::new(potential.as_ref(), stability_cap);
        Ok(Self {
            kind,
            potential,
            schedule,
            swap_rate,
            ws,
        })
    }

    /// Check that `state` has the shape this sampler expects.
    pub fn check_state(&self, s: &ChainState) -> Result<(), DynamicsError> {
        let n = self.potential.dim();
        let want2 = if self.kind == SamplerKind::Langevin { 0 } else { n };
        if s.x1.len() != n || s.x2.len() != want2 || s.z > 1 || !s.is_finite() {
            return Err(DynamicsError::InvalidConfig(format!(
                "{} state needs x1 of length {n}, x2 of length {want2}, z in {{0, 1}} and finite values",
                self.kind.name()
            )));
        }
        Ok(())
    }

    pub fn temperatures(&self, t: f64) -> TemperaturePair {
        self.schedule.at(t)
    }

    pub fn step(
        &mut self,
        s: &mut ChainState,
        dt: f64,
        noise: &mut dyn NoiseSource,
    ) -> Result<StepInfo, DynamicsError> {
        let temps = self.schedule.at(s.t);
        let p = self.potential.as_ref();
        let ws = &mut self.ws;
        let mut info = StepInfo::default();
        match self.kind {
            SamplerKind::Langevin => step_langevin(s, p, temps.tau1, dt, noise, ws)?,
            SamplerKind::Isa => {
                step_isa(s, p, &temps, dt, noise, ws)?;
            }
            SamplerKind::PtPosition => {
                info.swapped = step_pt_position(s, p, &temps, self.swap_rate, dt, noise, ws)?
            }
            SamplerKind::PtTemperature => {
                info.flipped = step_pt_temperature(s, p, &temps, self.swap_rate, dt, noise, ws)?
            }
        }
        Ok(info)
    }
}
