use serde::{Deserialize, Serialize};

use super::{ChainState, DynamicsError, NoiseSource, Sampler, SamplerKind, StreamNoise};
use crate::gibbs::weights_from_energies;

/// Columns of a recorded trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// Coordinates of both particles.
    Position,
    /// `H1, H2`.
    Energy,
    /// Diffusion coefficients `a1, a2` at the recorded state.
    Coefficients,
    /// Temperature label `z`.
    Label,
}

impl Observable {
    pub const ALL: [Observable; 4] = [
        Observable::Position,
        Observable::Energy,
        Observable::Coefficients,
        Observable::Label,
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdeConfig {
    pub dt: f64,
    pub n_steps: u64,
    pub seed: u64,
    /// Steps discarded before recording starts.
    pub burn_in: u64,
    /// Record every `thinning`-th step after burn-in.
    pub thinning: u64,
    /// Empty: keep counters and the final state only.
    pub record: Vec<Observable>,
    /// Bound on `dt |grad H|`; `None` uses half the box diameter.
    pub stability_cap: Option<f64>,
}

impl Default for SdeConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            n_steps: 0,
            seed: 0,
            burn_in: 0,
            thinning: 1,
            record: Observable::ALL.to_vec(),
            stability_cap: None,
        }
    }
}

impl SdeConfig {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(DynamicsError::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if self.thinning == 0 {
            return Err(DynamicsError::InvalidConfig("thinning must be at least 1".into()));
        }
        Ok(())
    }

    fn records_at(&self, step: u64) -> bool {
        step > self.burn_in && (step - self.burn_in) % self.thinning == 0
    }
}

/// Snapshot after a step. Langevin chains leave the second-particle fields
/// empty and `H2, a2` as NaN.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: f64,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub h1: f64,
    pub h2: f64,
    pub a1: f64,
    pub a2: f64,
    pub z: u8,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub steps: u64,
    pub recorded: u64,
    /// Position exchanges.
    pub swaps: u64,
    /// Temperature label flips.
    pub flips: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub kind: SamplerKind,
    pub dim: usize,
    pub seed: u64,
    pub chain: u64,
    pub observables: Vec<Observable>,
    pub records: Vec<Record>,
    pub final_state: ChainState,
    pub counters: Counters,
    pub warnings: Vec<String>,
}

/// The JSON-friendly part of a [`Trajectory`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub kind: SamplerKind,
    pub seed: u64,
    pub chain: u64,
    pub counters: Counters,
    pub final_state: ChainState,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn summary(&self) -> TrajectorySummary {
        TrajectorySummary {
            kind: self.kind,
            seed: self.seed,
            chain: self.chain,
            counters: self.counters,
            final_state: self.final_state.clone(),
            warnings: self.warnings.clone(),
        }
    }

    /// Column names in CSV order for the recorded observables.
    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        let two = self.kind.particles() == 2;
        if self.observables.contains(&Observable::Position) {
            let name = |p: usize, k: usize| {
                if self.dim == 1 {
                    format!("x{p}")
                } else {
                    format!("x{p}_{k}")
                }
            };
            for k in 0..self.dim {
                h.push(name(1, k));
            }
            if two {
                for k in 0..self.dim {
                    h.push(name(2, k));
                }
            }
        }
        if self.observables.contains(&Observable::Energy) {
            h.extend(["H1".into(), "H2".into()]);
        }
        if self.observables.contains(&Observable::Coefficients) {
            h.extend(["a1".into(), "a2".into()]);
        }
        if self.observables.contains(&Observable::Label) {
            h.push("z".into());
        }
        h
    }

    /// One row per record, aligned with [`Trajectory::header`].
    pub fn row(&self, r: &Record) -> Vec<f64> {
        let mut v = vec![r.t];
        if self.observables.contains(&Observable::Position) {
            v.extend(&r.x1);
            v.extend(&r.x2);
        }
        if self.observables.contains(&Observable::Energy) {
            v.extend([r.h1, r.h2]);
        }
        if self.observables.contains(&Observable::Coefficients) {
            v.extend([r.a1, r.a2]);
        }
        if self.observables.contains(&Observable::Label) {
            v.push(r.z as f64);
        }
        v
    }
}

fn snapshot(sampler: &Sampler, s: &ChainState) -> Record {
    let p = sampler.potential.as_ref();
    let temps = sampler.temperatures(s.t);
    let h1 = p.energy(&s.x1);
    let (h2, a1, a2) = match sampler.kind {
        SamplerKind::Langevin => (f64::NAN, temps.tau1, f64::NAN),
        SamplerKind::Isa => {
            let h2 = p.energy(&s.x2);
            let w = weights_from_energies(&temps, h1, h2);
            (h2, w.a1, w.a2)
        }
        SamplerKind::PtPosition => (p.energy(&s.x2), temps.tau1, temps.tau2),
        SamplerKind::PtTemperature => {
            let (c1, c2) = if s.z == 0 { (temps.tau1, temps.tau2) } else { (temps.tau2, temps.tau1) };
            (p.energy(&s.x2), c1, c2)
        }
    };
    Record {
        t: s.t,
        x1: s.x1.clone(),
        x2: s.x2.clone(),
        h1,
        h2,
        a1,
        a2,
        z: s.z,
    }
}

/// Run one chain with an explicit noise source. `observe` sees the state
/// after every step, recorded or not.
pub fn run_chain_observed(
    sampler: &mut Sampler,
    init: ChainState,
    cfg: &SdeConfig,
    chain: u64,
    noise: &mut dyn NoiseSource,
    observe: &mut dyn FnMut(&ChainState),
) -> Result<Trajectory, DynamicsError> {
    cfg.validate()?;
    sampler.check_state(&init)?;
    let mut warnings = Vec::new();
    if cfg.burn_in >= cfg.n_steps && cfg.n_steps > 0 && !cfg.record.is_empty() {
        let w = format!(
            "burn_in {} is not below n_steps {}; nothing is recorded",
            cfg.burn_in, cfg.n_steps
        );
        log::warn!("{w}");
        warnings.push(w);
    }
    let mut s = init;
    let mut counters = Counters::default();
    let mut records = Vec::new();
    for step in 1..=cfg.n_steps {
        let info = sampler.step(&mut s, cfg.dt, noise)?;
        counters.steps += 1;
        counters.swaps += info.swapped as u64;
        counters.flips += info.flipped as u64;
        if !cfg.record.is_empty() && cfg.records_at(step) {
            records.push(snapshot(sampler, &s));
            counters.recorded += 1;
        }
        observe(&s);
    }
    Ok(Trajectory {
        kind: sampler.kind,
        dim: sampler.potential.dim(),
        seed: cfg.seed,
        chain,
        observables: cfg.record.clone(),
        records,
        final_state: s,
        counters,
        warnings,
    })
}

/// Run one chain on the streams of `(cfg.seed, chain)`.
pub fn run_chain(
    sampler: &mut Sampler,
    init: ChainState,
    cfg: &SdeConfig,
    chain: u64,
) -> Result<Trajectory, DynamicsError> {
    let mut noise = StreamNoise::new(cfg.seed, chain);
    run_chain_observed(sampler, init, cfg, chain, &mut noise, &mut |_| {})
}
