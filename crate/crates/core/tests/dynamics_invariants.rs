use std::sync::Arc;

use isa_core::dynamics::{
    run_chain, run_chain_observed, stream, ChainState, Sampler, SamplerKind, Schedule, SdeConfig,
    StreamNoise, BLOCK_JUMPS, BLOCK_PARTICLE_1, BLOCK_PARTICLE_2,
};
use isa_core::landscape::{corpus_potential, DomainBox, GrowthDeclaration, Polynomial};
use isa_core::{SharedPotential, TemperaturePair};

fn tilted() -> SharedPotential {
    corpus_potential("tilted_double_well").unwrap()
}

fn cfg(n: u64, seed: u64) -> SdeConfig {
    SdeConfig {
        n_steps: n,
        seed,
        ..Default::default()
    }
}

fn sampler(kind: SamplerKind, t: TemperaturePair, a: f64) -> Sampler {
    Sampler::new(kind, tilted(), Schedule::frozen(t), a, None).unwrap()
}

#[test]
fn equal_temperatures_reduce_to_langevin_bit_for_bit() {
    let tau = 0.3;
    let t = TemperaturePair::equal(tau);
    let c = cfg(5000, 17);
    let isa = run_chain(&mut sampler(SamplerKind::Isa, t, 0.0), ChainState::pair(vec![0.8], vec![-1.1]), &c, 2)
        .unwrap();

    let mut lang = sampler(SamplerKind::Langevin, t, 0.0);
    let first = run_chain(&mut lang, ChainState::single(vec![0.8]), &c, 2).unwrap();
    let mut swapped = StreamNoise::new(17, 2);
    swapped.swap_blocks();
    let second =
        run_chain_observed(&mut lang, ChainState::single(vec![-1.1]), &c, 2, &mut swapped, &mut |_| {}).unwrap();

    assert_eq!(isa.records.len(), 5000);
    for ((a, b), d) in isa.records.iter().zip(&first.records).zip(&second.records) {
        assert_eq!(a.x1[0].to_bits(), b.x1[0].to_bits());
        assert_eq!(a.x2[0].to_bits(), d.x1[0].to_bits());
        assert_eq!(a.a1, tau);
        assert_eq!(a.a2, tau);
    }
}

#[test]
fn isa_is_exchangeable() {
    let t = TemperaturePair::new(0.15, 0.45).unwrap();
    let c = cfg(5000, 3);
    let init = ChainState::pair(vec![0.9], vec![-0.4]);
    let a = run_chain(&mut sampler(SamplerKind::Isa, t, 0.0), init.clone(), &c, 0).unwrap();
    let mut noise = StreamNoise::from_streams(
        stream(3, 0, BLOCK_PARTICLE_2),
        stream(3, 0, BLOCK_PARTICLE_1),
        stream(3, 0, BLOCK_JUMPS),
    );
    let mut swapped_init = init.swapped();
    swapped_init.z = init.z;
    let b = run_chain_observed(&mut sampler(SamplerKind::Isa, t, 0.0), swapped_init, &c, 0, &mut noise, &mut |_| {})
        .unwrap();
    for (r, s) in a.records.iter().zip(&b.records) {
        assert_eq!(r.x1, s.x2);
        assert_eq!(r.x2, s.x1);
        assert_eq!(r.a1, s.a2);
        assert_eq!(r.a2, s.a1);
    }
}

#[test]
fn tempering_variants_agree_without_jumps() {
    let t = TemperaturePair::new(0.15, 0.45).unwrap();
    let c = cfg(5000, 8);
    let init = ChainState::pair(vec![0.9], vec![-1.0]);
    let a = run_chain(&mut sampler(SamplerKind::PtPosition, t, 0.0), init.clone(), &c, 1).unwrap();
    let b = run_chain(&mut sampler(SamplerKind::PtTemperature, t, 0.0), init, &c, 1).unwrap();
    assert_eq!(a.counters.swaps, 0);
    assert_eq!(b.counters.flips, 0);
    for (r, s) in a.records.iter().zip(&b.records) {
        assert_eq!(r.x1, s.x1);
        assert_eq!(r.x2, s.x2);
    }
}

#[test]
fn tempering_jumps_happen_at_positive_rate() {
    let t = TemperaturePair::new(0.15, 0.45).unwrap();
    let c = cfg(20_000, 8);
    let init = ChainState::pair(vec![0.9], vec![-1.0]);
    let a = run_chain(&mut sampler(SamplerKind::PtPosition, t, 50.0), init.clone(), &c, 1).unwrap();
    let b = run_chain(&mut sampler(SamplerKind::PtTemperature, t, 50.0), init, &c, 1).unwrap();
    assert!(a.counters.swaps > 10);
    assert!(b.counters.flips > 10);
    for r in &b.records {
        let (c1, c2) = if r.z == 0 { (0.15, 0.45) } else { (0.45, 0.15) };
        assert_eq!((r.a1, r.a2), (c1, c2));
    }
}

#[test]
fn isa_coefficients_stay_in_band() {
    let t = TemperaturePair::new(0.1, 0.7).unwrap();
    let a = run_chain(&mut sampler(SamplerKind::Isa, t, 0.0), ChainState::pair(vec![1.0], vec![-1.0]), &cfg(20_000, 1), 0)
        .unwrap();
    for r in &a.records {
        assert!(r.a1 >= 0.1 && r.a1 <= 0.7 && r.a2 >= 0.1 && r.a2 <= 0.7);
        assert!((r.a1 + r.a2 - 0.8).abs() <= 4.0 * f64::EPSILON);
    }
}

#[test]
fn ornstein_uhlenbeck_variance() {
    let p: SharedPotential = Arc::new(
        Polynomial::univariate(&[0.0, 0.0, 0.5], DomainBox::cube(1, -8.0, 8.0), GrowthDeclaration::BOTH).unwrap(),
    );
    let tau = 0.5;
    let dt = 1e-2;
    let mut s = Sampler::new(SamplerKind::Langevin, p, Schedule::Frozen { tau1: tau, tau2: tau }, 0.0, None).unwrap();
    let c = SdeConfig {
        dt,
        n_steps: 2_000_000,
        seed: 4,
        burn_in: 1000,
        record: vec![],
        ..Default::default()
    };
    let (mut n, mut s1, mut s2) = (0.0, 0.0, 0.0);
    let mut noise = StreamNoise::new(4, 0);
    run_chain_observed(&mut s, ChainState::single(vec![0.0]), &c, 0, &mut noise, &mut |st| {
        n += 1.0;
        s1 += st.x1[0];
        s2 += st.x1[0] * st.x1[0];
    })
    .unwrap();
    let var = s2 / n - (s1 / n).powi(2);
    // Euler-Maruyama stationary variance of the OU chain is tau / (1 - dt / 2).
    let want = tau / (1.0 - dt / 2.0);
    // Integrated autocorrelation time 1 gives about 1e4 effective samples,
    // so the standard error of the variance is near 0.007.
    assert!((var - want).abs() < 0.03, "variance {var}, expected {want}");
}
