//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use isa_core::dynamics::{
    anneal_isa, anneal_langevin, ergodic_deviation, run_chain, run_chain_observed, sign_test,
    ChainState, DeviationConfig, Histogram, InitialLaw, Sampler, SamplerKind, Schedule, SdeConfig,
    StreamNoise,
};
use isa_core::gibbs::{log_mu, tv_distance, weights_from_energies};
use isa_core::kramers::{phi_n, poincare_bound, sa_exponent};
use isa_core::spectral::{
    ansatz_1d, assemble_isa_form, assemble_langevin_form, lower_bound_testfn, rayleigh_quotient,
    spectral_gap, AnsatzOptions, HShape, TestFnOptions,
};
use isa_core::{build_landscape, corpus_potential, Grid, Landscape, LandscapeOptions, PredictionConstants, TemperaturePair};

type Check = Result<(bool, String), String>;

fn landscape(id: &str) -> Landscape {
    build_landscape(corpus_potential(id).unwrap(), &LandscapeOptions::default()).unwrap()
}

/// Least-squares slope of `y` on `x`.
fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn isa_gap(l: &Landscape, t: &TemperaturePair, nodes: usize) -> Result<(f64, isa_core::DiscreteForm, Grid), String> {
    let p = l.potential();
    let axis = Grid::over(p.domain(), nodes).map_err(|e| e.to_string())?;
    let grid = axis.product(&axis);
    let form = assemble_isa_form(p.as_ref(), t, &grid).map_err(|e| e.to_string())?;
    let gap = spectral_gap(&form).map_err(|e| e.to_string())?;
    Ok((gap.lambda1, form, axis))
}

fn langevin_gap(l: &Landscape, tau: f64, nodes: usize) -> Result<f64, String> {
    let p = l.potential();
    let grid = Grid::over(p.domain(), nodes).map_err(|e| e.to_string())?;
    let form = assemble_langevin_form(p.as_ref(), tau, &grid).map_err(|e| e.to_string())?;
    Ok(spectral_gap(&form).map_err(|e| e.to_string())?.lambda1)
}

const ISA_NODES: usize = 240;
const LANGEVIN_NODES: usize = 2000;

fn c1_ou() -> Check {
    let start = Instant::now();
    let p = corpus_potential("quadratic").unwrap();
    let grid = Grid::over(p.domain(), 512).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for tau in [0.1, 0.5, 1.0] {
        let form = assemble_langevin_form(p.as_ref(), tau, &grid).map_err(|e| e.to_string())?;
        let g = spectral_gap(&form).map_err(|e| e.to_string())?.lambda1;
        worst = worst.max((g - 1.0).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((worst <= 0.02 && secs < 10.0, format!("max |lambda1 - 1| = {worst:.2e}, {secs:.2} s")))
}

fn c2_langevin_exponent() -> Check {
    let l = landscape("tilted_double_well");
    let taus = [0.25, 0.2, 0.15];
    let mut x = Vec::new();
    let mut y = Vec::new();
    for tau in taus {
        let g = langevin_gap(&l, tau, LANGEVIN_NODES)?;
        x.push(1.0 / tau);
        y.push(-g.ln());
    }
    let e = slope(&x, &y);
    let rel = (e / l.e_star - 1.0).abs();
    Ok((rel <= 0.10, format!("fitted {e:.4} vs E* {:.4} ({:.1}%)", l.e_star, 100.0 * rel)))
}

fn c3_isa_exponent() -> Check {
    let l = landscape("tilted_double_well");
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut ordered = true;
    let mut detail = String::new();
    for tau2 in [0.25, 0.2, 0.15] {
        let t = TemperaturePair::from_ratio(tau2 / 3.0, 3.0).map_err(|e| e.to_string())?;
        let (g, _, _) = isa_gap(&l, &t, ISA_NODES)?;
        let lang = langevin_gap(&l, t.tau1, LANGEVIN_NODES)?;
        ordered &= g >= lang;
        detail.push_str(&format!(" [tau2 {tau2}: isa {g:.3e} >= langevin {lang:.3e}]"));
        x.push(1.0 / tau2);
        y.push(-g.ln());
    }
    let e = slope(&x, &y);
    let rel = (e / l.e_star - 1.0).abs();
    Ok((
        rel <= 0.10 && ordered,
        format!("fitted {e:.4} vs E* {:.4} ({:.1}%);{detail}", l.e_star, 100.0 * rel),
    ))
}

fn c4_prefactor() -> Check {
    let l = landscape("tilted_double_well");
    let tau2 = 0.15;
    let t = TemperaturePair::from_ratio(tau2 / 3.0, 3.0).map_err(|e| e.to_string())?;
    let (g, form, axis) = isa_gap(&l, &t, ISA_NODES)?;
    let pred = poincare_bound(&l, &t, &PredictionConstants::default()).map_err(|e| e.to_string())?;
    let allowed = 1.0 + 3.0 * tau2.sqrt() * tau2.ln().abs().powf(1.5);
    let ratio = (1.0 / g) / pred.leading();
    let a = ansatz_1d(&l, &t, &axis, &AnsatzOptions::default()).map_err(|e| e.to_string())?;
    let q = rayleigh_quotient(&a.product(&a.g_pi), &form).map_err(|e| e.to_string())?;
    let q_ratio = q * pred.bound_value;
    let pass = ratio <= allowed && ratio >= 1.0 / allowed && q >= g && q_ratio <= 1.5 && q_ratio >= 1.0 / 1.5;
    Ok((
        pass,
        format!(
            "(1/lambda1)/leading = {ratio:.3} within x{allowed:.2}; ansatz quotient {q:.4e} >= lambda1 {g:.4e}, quotient/predicted rate = {q_ratio:.3}"
        ),
    ))
}

fn c5_ratio_dependence() -> Check {
    let l2 = landscape("tilted_double_well_2d");
    let opts = TestFnOptions::default();
    let mut q = Vec::new();
    for k in [10.0, 100.0, 1000.0] {
        let t = TemperaturePair::from_ratio(0.2 / k, k).map_err(|e| e.to_string())?;
        q.push(lower_bound_testfn(&l2, &t, 0.2, HShape::Standard, &opts).map_err(|e| e.to_string())?.quotient);
    }
    let (d1, d2) = (q[1] - q[0], q[2] - q[1]);
    // Equal ln-steps, so the increments themselves must agree within 50%.
    let step_ratio = d2 / d1;
    let monotone = d1 > 0.0 && d2 > 0.0;
    let l3 = landscape("tilted_double_well_3d");
    let eta: f64 = 0.2;
    let mut q3 = Vec::new();
    for k in [10.0, 100.0] {
        let t = TemperaturePair::from_ratio(0.2 / k, k).map_err(|e| e.to_string())?;
        q3.push(lower_bound_testfn(&l3, &t, eta, HShape::Standard, &opts).map_err(|e| e.to_string())?.quotient);
    }
    let need = 10f64.powf((1.0 - eta) / 2.0) / 2.0;
    let growth = q3[1] / q3[0];
    Ok((
        monotone && (step_ratio - 1.0).abs() <= 0.5 && growth >= need,
        format!(
            "n=2 quotients {:.4} {:.4} {:.4}, increment ratio {step_ratio:.3}; n=3 growth {growth:.3} >= {need:.3}",
            q[0], q[1], q[2]
        ),
    ))
}

fn occupation(
    kind: SamplerKind,
    l: &Landscape,
    t: TemperaturePair,
    a: f64,
    dt: f64,
    steps: u64,
    chains: u64,
    seed: u64,
    init: &ChainState,
    bins: &Histogram,
) -> Result<Histogram, String> {
    let parts: Vec<Histogram> = (0..chains)
        .into_par_iter()
        .map(|c| -> Result<Histogram, String> {
            let mut s = Sampler::new(kind, l.potential().clone(), Schedule::frozen(t), a, None).map_err(|e| e.to_string())?;
            let cfg = SdeConfig {
                dt,
                n_steps: steps,
                seed,
                record: vec![],
                ..Default::default()
            };
            let mut h = bins.clone();
            let mut noise = StreamNoise::new(seed, c);
            run_chain_observed(&mut s, init.clone(), &cfg, c, &mut noise, &mut |x| h.add_state(x))
                .map_err(|e| e.to_string())?;
            Ok(h)
        })
        .collect::<Result<_, _>>()?;
    let mut h = bins.clone();
    for p in &parts {
        h.merge(p).map_err(|e| e.to_string())?;
    }
    Ok(h)
}

fn bins_2d() -> Histogram {
    Histogram::new(vec![-2.0, -2.0], vec![2.0, 2.0], vec![40, 40]).unwrap()
}

fn c6_invariant_measure() -> Check {
    let l = landscape("tilted_double_well");
    let t = TemperaturePair::new(0.15, 0.45).map_err(|e| e.to_string())?;
    let bins = bins_2d();
    let reference = bins.mu_reference(l.potential().as_ref(), &t, 8).map_err(|e| e.to_string())?;
    let init = ChainState::pair(l.minima[0].location.clone(), l.minima[l.p].location.clone());
    // Four chains, 2e7 steps in total; the half step keeps the simulated time.
    let chains = 4;
    let h1 = occupation(SamplerKind::Isa, &l, t, 0.0, 1e-3, 5_000_000, chains, 2024, &init, &bins)?;
    let h2 = occupation(SamplerKind::Isa, &l, t, 0.0, 5e-4, 10_000_000, chains, 2024, &init, &bins)?;
    let tv1 = tv_distance(&h1.probabilities(), &reference).map_err(|e| e.to_string())?;
    let tv2 = tv_distance(&h2.probabilities(), &reference).map_err(|e| e.to_string())?;
    Ok((
        tv1 <= 0.05 && (tv1 - tv2).abs() <= 0.02,
        format!("TV {tv1:.4} at dt 1e-3, {tv2:.4} at dt 5e-4, change {:.4}", (tv1 - tv2).abs()),
    ))
}

fn c7_weak_limit() -> Check {
    let l = landscape("tilted_double_well");
    let t = TemperaturePair::new(0.15, 0.45).map_err(|e| e.to_string())?;
    let bins = bins_2d();
    let m2 = l.minima[l.p].location.clone();
    let init = ChainState::pair(m2.clone(), m2);
    // Occupation measure over [0, 20] from a common start, pooled over replicas.
    let (dt, steps, reps, seed) = (1e-3, 20_000, 1600, 77);
    let isa = occupation(SamplerKind::Isa, &l, t, 0.0, dt, steps, reps, seed, &init, &bins)?.probabilities();
    let mut tv = Vec::new();
    for a in [1.0, 10.0, 100.0] {
        let h = occupation(SamplerKind::PtTemperature, &l, t, a, dt, steps, reps, seed, &init, &bins)?;
        tv.push(tv_distance(&h.probabilities(), &isa).map_err(|e| e.to_string())?);
    }
    Ok((
        tv[0] > tv[1] && tv[1] > tv[2] && tv[2] <= 0.1,
        format!("TV to isa at a = 1, 10, 100: {:.4} {:.4} {:.4}", tv[0], tv[1], tv[2]),
    ))
}

fn c8_deviation() -> Check {
    let l = landscape("tilted_double_well");
    let t = TemperaturePair::new(0.15, 0.45).map_err(|e| e.to_string())?;
    let cfg = DeviationConfig {
        horizons: vec![10.0, 25.0, 50.0, 100.0, 200.0],
        radii: vec![0.1, 0.2, 0.4, 0.8],
        n_replicas: 400,
        dt: 2e-3,
        seed: 8,
        initial: InitialLaw::Mu,
        grid_nodes: 200,
        ..Default::default()
    };
    let f = |x1: &[f64], _: &[f64]| x1[0].clamp(-1.0, 1.0);
    let r = ergodic_deviation(&l, &t, &f, &cfg).map_err(|e| e.to_string())?;
    let bad: Vec<_> = r.points.iter().filter(|p| p.estimate > p.scaled_bound).collect();
    let tightest = r
        .points
        .iter()
        .map(|p| p.scaled_bound - p.estimate)
        .fold(f64::INFINITY, f64::min);
    Ok((
        bad.is_empty() && r.points.len() == 20,
        format!(
            "{} points, {} violations, smallest margin {tightest:.3}, ||dnu/dmu|| = {:.4}, rho = {:.3e}",
            r.points.len(),
            bad.len(),
            r.density_norm,
            r.rho
        ),
    ))
}

fn c9_annealing() -> Check {
    let l = landscape("tilted_double_well");
    let (e, k) = (0.35, 3.0);
    if !(l.e_star / k < e && e < l.e_star) {
        return Err(format!("E = {e} outside (E*/K, E*)"));
    }
    let delta = 0.2 * l.e_star;
    let m2 = l.minima[l.p].location.clone();
    let cfg = SdeConfig {
        dt: 1e-3,
        n_steps: 1_000_000,
        seed: 99,
        record: vec![],
        ..Default::default()
    };
    let p = l.potential().clone();
    let outcomes: Vec<(bool, bool)> = (0..200u64)
        .into_par_iter()
        .map(|c| -> Result<(bool, bool), String> {
            let a = anneal_isa(p.clone(), Schedule::logarithmic(e, k).unwrap(), ChainState::pair(m2.clone(), m2.clone()), &cfg, delta, c)
                .map_err(|e| e.to_string())?;
            let b = anneal_langevin(p.clone(), Schedule::logarithmic(e, 1.0).unwrap(), ChainState::single(m2.clone()), &cfg, delta, c)
                .map_err(|e| e.to_string())?;
            Ok((a.success, b.success))
        })
        .collect::<Result<_, _>>()?;
    let n = outcomes.len() as f64;
    let si = outcomes.iter().filter(|o| o.0).count() as f64 / n;
    let sl = outcomes.iter().filter(|o| o.1).count() as f64 / n;
    let wins = outcomes.iter().filter(|o| o.0 && !o.1).count() as u64;
    let losses = outcomes.iter().filter(|o| !o.0 && o.1).count() as u64;
    let pv = sign_test(wins, losses);
    Ok((
        si - sl >= 0.20 && pv < 0.05,
        format!("isa {:.1}% vs Langevin {:.1}%, sign test p = {pv:.1e}", 100.0 * si, 100.0 * sl),
    ))
}

fn c10_invariants() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut ok = true;
    for _ in 0..100_000 {
        let tau1: f64 = rng.random_range(1e-3..1.0);
        let t = TemperaturePair::from_ratio(tau1, rng.random_range(1.01..100.0)).unwrap();
        let (h1, h2) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let w = weights_from_energies(&t, h1, h2);
        let s = weights_from_energies(&t, h2, h1);
        ok &= w.rho_plus + w.rho_minus == 1.0;
        ok &= (w.a1 + w.a2 - (t.tau1 + t.tau2)).abs() <= 4.0 * f64::EPSILON * (t.tau1 + t.tau2);
        ok &= [w.a1, w.a2].iter().all(|a| *a >= t.tau1 && *a <= t.tau2);
        ok &= s.a1 == w.a2 && s.rho_plus == w.rho_minus;
    }
    let phi = phi_n(2, 1.0).unwrap() == 1.0 && phi_n(3, 4.0).unwrap() == 3.0 && phi_n(1, 1e6).unwrap() == 1.0;
    let sa = (sa_exponent(1.0, 2.0, 1.0, 0.5).unwrap() - 0.25).abs() < 1e-15
        && sa_exponent(0.5, 2.0, 1.0, 0.5).is_err()
        && (sa_exponent(1.0, 2.0, 1.0, 1e300).unwrap() - 0.25).abs() < 1e-15;
    let p = corpus_potential("tilted_double_well").unwrap();
    let t = TemperaturePair::new(0.15, 0.45).unwrap();
    let mut sym = true;
    for _ in 0..1000 {
        let (a, b) = ([rng.random_range(-2.0..2.0)], [rng.random_range(-2.0..2.0)]);
        sym &= log_mu(p.as_ref(), &t, &a, &b).unwrap() == log_mu(p.as_ref(), &t, &b, &a).unwrap();
    }
    let eq = TemperaturePair::equal(0.3);
    let c = SdeConfig {
        n_steps: 2000,
        seed: 5,
        ..Default::default()
    };
    let mut isa = Sampler::new(SamplerKind::Isa, p.clone(), Schedule::frozen(eq), 0.0, None).unwrap();
    let mut lang = Sampler::new(SamplerKind::Langevin, p, Schedule::frozen(eq), 0.0, None).unwrap();
    let a = run_chain(&mut isa, ChainState::pair(vec![0.5], vec![0.5]), &c, 0).map_err(|e| e.to_string())?;
    let b = run_chain(&mut lang, ChainState::single(vec![0.5]), &c, 0).map_err(|e| e.to_string())?;
    let same = a.records.iter().zip(&b.records).all(|(r, s)| r.x1[0].to_bits() == s.x1[0].to_bits());
    let secs = start.elapsed().as_secs_f64();
    Ok((
        ok && phi && sa && sym && same && secs < 1.0,
        format!("weights {ok}, phi table {phi}, sa exponent {sa}, mu symmetry {sym}, Langevin reduction {same}, {secs:.2} s"),
    ))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Check); 10] = [
        (1, "OU spectral gap", c1_ou),
        (2, "Langevin Eyring-Kramers exponent", c2_langevin_exponent),
        (3, "isa exponent and gap ordering", c3_isa_exponent),
        (4, "isa prefactor and ansatz quotient", c4_prefactor),
        (5, "temperature-ratio dependence", c5_ratio_dependence),
        (6, "isa invariant measure", c6_invariant_measure),
        (7, "temperature-swap weak limit", c7_weak_limit),
        (8, "ergodic deviation bound", c8_deviation),
        (9, "simulated annealing", c9_annealing),
        (10, "algebraic invariants", c10_invariants),
    ];
    let only: Vec<u32> = std::env::var("ISA_ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|v| v.trim().parse().ok()).collect())
        .unwrap_or_default();
    let mut failed = 0;
    for (id, name, check) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        let secs = start.elapsed().as_secs_f64();
        println!("{} criterion {id:>2} {name}: {detail} [{secs:.1} s]", if pass { "PASS" } else { "FAIL" });
        failed += (!pass) as u32;
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
