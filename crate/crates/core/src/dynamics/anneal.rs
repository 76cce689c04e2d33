use serde::{Deserialize, Serialize};

use super::{
    run_chain_observed, ChainState, DynamicsError, Sampler, SamplerKind, Schedule, SdeConfig,
    StreamNoise, Trajectory,
};
use crate::landscape::SharedPotential;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealOutcome {
    pub trajectory: Trajectory,
    /// Lowest particle energy at the final time is at most `delta`.
    pub success: bool,
    /// First time the lowest particle energy dropped to `delta` or below.
    pub hitting_time: Option<f64>,
    pub final_energy: f64,
    pub delta: f64,
}

fn anneal(
    kind: SamplerKind,
    p: SharedPotential,
    schedule: Schedule,
    init: ChainState,
    cfg: &SdeConfig,
    delta: f64,
    chain: u64,
) -> Result<AnnealOutcome, DynamicsError> {
    if delta.is_nan() {
        return Err(DynamicsError::InvalidConfig("success threshold is NaN".into()));
    }
    let mut sampler = Sampler::new(kind, p.clone(), schedule, 0.0, cfg.stability_cap)?;
    let low = |s: &ChainState| {
        let h = p.energy(&s.x1);
        if s.x2.is_empty() {
            h
        } else {
            h.min(p.energy(&s.x2))
        }
    };
    let mut hitting_time = if !init.x1.is_empty() && low(&init) <= delta { Some(init.t) } else { None };
    let mut noise = StreamNoise::new(cfg.seed, chain);
    let trajectory = run_chain_observed(&mut sampler, init, cfg, chain, &mut noise, &mut |s| {
        if hitting_time.is_none() && low(s) <= delta {
            hitting_time = Some(s.t);
        }
    })?;
    let final_energy = low(&trajectory.final_state);
    Ok(AnnealOutcome {
        success: final_energy <= delta,
        hitting_time,
        final_energy,
        delta,
        trajectory,
    })
}

/// Simulated annealing with the infinite swapping process. Temperatures are
/// re-evaluated from elapsed simulated time at each step. `p` should be
/// normalized so its global minimum is 0, as returned by
/// `Landscape::potential`.
pub fn anneal_isa(
    p: SharedPotential,
    schedule: Schedule,
    init: ChainState,
    cfg: &SdeConfig,
    delta: f64,
    chain: u64,
) -> Result<AnnealOutcome, DynamicsError> {
    anneal(SamplerKind::Isa, p, schedule, init, cfg, delta, chain)
}

/// Simulated annealing with plain Langevin dynamics at the cold temperature
/// of `schedule`; a logarithmic schedule gives `tau(t) = E / ln(2 + t)`.
pub fn anneal_langevin(
    p: SharedPotential,
    schedule: Schedule,
    init: ChainState,
    cfg: &SdeConfig,
    delta: f64,
    chain: u64,
) -> Result<AnnealOutcome, DynamicsError> {
    anneal(SamplerKind::Langevin, p, schedule, init, cfg, delta, chain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::run_chain;
    use crate::gibbs::TemperaturePair;
    use crate::landscape::{build_landscape, corpus_potential, LandscapeOptions};

    fn setup() -> (SharedPotential, ChainState) {
        let raw = corpus_potential("tilted_double_well").unwrap();
        let l = build_landscape(raw, &LandscapeOptions::default()).unwrap();
        let m = l.minima[l.p].location.clone();
        (l.potential().clone(), ChainState::pair(m.clone(), m))
    }

    #[test]
    fn frozen_schedule_matches_fixed_temperature_run() {
        let (p, init) = setup();
        let t = TemperaturePair::new(0.2, 0.6).unwrap();
        let cfg = SdeConfig {
            n_steps: 500,
            seed: 5,
            ..Default::default()
        };
        let a = anneal_isa(p.clone(), Schedule::frozen(t), init.clone(), &cfg, 0.1, 2).unwrap();
        let mut s = Sampler::new(SamplerKind::Isa, p, Schedule::frozen(t), 0.0, None).unwrap();
        let b = run_chain(&mut s, init, &cfg, 2).unwrap();
        assert_eq!(a.trajectory, b);
    }

    #[test]
    fn huge_threshold_always_succeeds() {
        let (p, init) = setup();
        let cfg = SdeConfig {
            n_steps: 200,
            seed: 1,
            record: vec![],
            ..Default::default()
        };
        for chain in 0..5 {
            let a = anneal_isa(p.clone(), Schedule::logarithmic(0.5, 3.0).unwrap(), init.clone(), &cfg, 1e9, chain)
                .unwrap();
            assert!(a.success);
            assert_eq!(a.hitting_time, Some(0.0));
            let single = ChainState::single(init.x1.clone());
            let b = anneal_langevin(p.clone(), Schedule::logarithmic(0.5, 1.0).unwrap(), single, &cfg, 1e9, chain)
                .unwrap();
            assert!(b.success);
        }
    }

    #[test]
    fn negative_threshold_never_succeeds() {
        let (p, init) = setup();
        let cfg = SdeConfig {
            n_steps: 200,
            seed: 1,
            record: vec![],
            ..Default::default()
        };
        let a = anneal_isa(p, Schedule::logarithmic(0.5, 3.0).unwrap(), init, &cfg, -1.0, 0).unwrap();
        assert!(!a.success && a.hitting_time.is_none());
    }
}
