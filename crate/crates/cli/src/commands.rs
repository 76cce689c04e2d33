//! The six experiment kinds. Each writes its result files plus
//! `resolved_config.toml` into the run directory.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use isa_core::dynamics::{
    anneal_isa, anneal_langevin, ergodic_deviation, run_chain_observed, sign_test, wilson_interval,
    ChainState, Counters, DeviationConfig, DeviationPoint, Histogram, InitialLaw, Sampler, Schedule,
    StreamNoise, Trajectory,
};
use isa_core::gibbs::tv_distance;
use isa_core::kramers::{langevin_poincare_bound, lsi_bound, poincare_bound, sa_exponent, speedup_ratio};
use isa_core::landscape::CriticalPoint;
use isa_core::spectral::{assemble_isa_form_with, assemble_langevin_form_with, spectral_gap, FormOptions};
use isa_core::{
    build_landscape, DiscreteForm, EKPrediction, Grid, Landscape, LandscapeOptions, SamplerKind,
    SdeConfig, SharedPotential, TemperaturePair,
};

use crate::config::{ExperimentConfig, ExperimentKind, InitialChoice};
use crate::output::{mean_ci, num, opt, write_csv, write_json, MeanCi};
use crate::report::{report_compare, RunResult};
use crate::CliError;

/// Reference masses cost `bins * refine^dim` energy evaluations; beyond this
/// the run is refused rather than left to grind.
const MAX_REFERENCE_EVALS: u64 = 400_000_000;

/// Run one experiment and return its output directory.
pub fn execute(kind: ExperimentKind, mut cfg: ExperimentConfig) -> Result<PathBuf, CliError> {
    if let Some(k) = cfg.experiment.kind {
        if k != kind {
            return Err(CliError::Config(format!(
                "configuration is for `{}` but the command is `{}`",
                k.name(),
                kind.name()
            )));
        }
    }
    cfg.experiment.kind = Some(kind);
    let out = cfg.output_dir(kind);
    cfg.experiment.output = Some(out.clone());
    let ctx = Context::new(cfg, out.clone())?;
    fs::create_dir_all(&out)?;
    fs::write(out.join("resolved_config.toml"), ctx.cfg.to_toml())?;
    match kind {
        ExperimentKind::Predict => predict(&ctx),
        ExperimentKind::Sample => sample(&ctx),
        ExperimentKind::Anneal => anneal(&ctx),
        ExperimentKind::Spectrum => spectrum(&ctx),
        ExperimentKind::Compare => compare(&ctx),
        ExperimentKind::Deviation => deviation(&ctx),
    }?;
    Ok(out)
}

struct Context {
    cfg: ExperimentConfig,
    out: PathBuf,
    landscape: Landscape,
}

impl Context {
    fn new(cfg: ExperimentConfig, out: PathBuf) -> Result<Self, CliError> {
        let e = &cfg.experiment;
        if e.seeds.is_empty() {
            return Err(CliError::Config("experiment.seeds is empty".into()));
        }
        if e.seeds.iter().collect::<BTreeSet<_>>().len() != e.seeds.len() {
            return Err(CliError::Config("experiment.seeds has duplicates".into()));
        }
        if !(e.confidence > 0.0 && e.confidence < 1.0) {
            return Err(CliError::Config(format!("experiment.confidence = {} not in (0, 1)", e.confidence)));
        }
        let raw = cfg.potential.build()?;
        let opts = LandscapeOptions {
            require_barrier: false,
            ..Default::default()
        };
        let landscape =
            build_landscape(raw, &opts).map_err(|e| CliError::Config(format!("potential: {e}")))?;
        let ctx = Self { cfg, out, landscape };
        ctx.sde(0).validate()?;
        Ok(ctx)
    }

    fn potential(&self) -> &SharedPotential {
        self.landscape.potential()
    }

    fn dim(&self) -> usize {
        self.landscape.dim()
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn confidence(&self) -> f64 {
        self.cfg.experiment.confidence
    }

    fn sde(&self, seed: u64) -> SdeConfig {
        let s = &self.cfg.sde;
        SdeConfig {
            dt: s.dt,
            n_steps: s.n_steps,
            seed,
            burn_in: s.burn_in,
            thinning: s.thinning,
            record: s.record.clone(),
            stability_cap: s.stability_cap,
        }
    }

    fn temperatures(&self, kind: SamplerKind) -> Result<TemperaturePair, CliError> {
        self.cfg.temperatures.resolve(kind == SamplerKind::Langevin)
    }

    fn require_barrier(&self, what: &str) -> Result<(), CliError> {
        if self.landscape.n_minima() < 2 {
            return Err(CliError::Config(format!(
                "{what} needs a potential with at least two minima; `{}` has {}",
                self.cfg.potential.label(),
                self.landscape.n_minima()
            )));
        }
        Ok(())
    }

    /// `[init]` if given, otherwise both particles at the dominating minimum.
    fn init(&self, kind: SamplerKind) -> Result<ChainState, CliError> {
        let n = self.dim();
        let (x1, x2, z) = match &self.cfg.init {
            Some(i) => (i.x1.clone(), i.x2.clone().unwrap_or_else(|| i.x1.clone()), i.z),
            None => {
                let m = self.landscape.minima[self.landscape.p].location.clone();
                (m.clone(), m, 0)
            }
        };
        if x1.len() != n || x2.len() != n {
            return Err(CliError::Config(format!("init positions must have {n} coordinates")));
        }
        if z > 1 {
            return Err(CliError::Config(format!("init.z = {z}, expected 0 or 1")));
        }
        Ok(if kind.particles() == 1 {
            ChainState::single(x1)
        } else {
            let mut s = ChainState::pair(x1, x2);
            s.z = z;
            s
        })
    }

    fn sampler(&self, kind: SamplerKind, t: TemperaturePair, swap_rate: f64) -> Result<Sampler, CliError> {
        Ok(Sampler::new(kind, self.potential().clone(), Schedule::frozen(t), swap_rate, self.cfg.sde.stability_cap)?)
    }

    /// Empty histogram over the domain box, repeated once per particle.
    fn histogram(&self, kind: SamplerKind) -> Result<Histogram, CliError> {
        let d = self.potential().domain();
        let reps = kind.particles();
        let lo: Vec<f64> = (0..reps).flat_map(|_| d.lo.clone()).collect();
        let hi: Vec<f64> = (0..reps).flat_map(|_| d.hi.clone()).collect();
        let h = &self.cfg.histogram;
        if h.bins == 0 {
            return Err(CliError::Config("histogram.bins must be positive".into()));
        }
        let axes = lo.len() as u32;
        let cells = (h.bins as u64).checked_pow(axes);
        let evals = cells.and_then(|c| c.checked_mul((h.refine.max(1) as u64).checked_pow(axes)?));
        if evals.map_or(true, |e| e > MAX_REFERENCE_EVALS) {
            return Err(CliError::Config(format!(
                "histogram with {} bins and refine {} on {axes} axes is too large",
                h.bins, h.refine
            )));
        }
        Ok(Histogram::new(lo, hi, vec![h.bins; axes as usize])?)
    }

    /// Bin masses of the law each sampler targets: the Gibbs measure at
    /// `tau1` for Langevin, the product measure for position swaps and `mu`
    /// for the isa and for temperature swaps (summed over labels).
    fn reference(&self, kind: SamplerKind, t: &TemperaturePair, h: &Histogram) -> Result<(String, Vec<f64>), CliError> {
        let p = self.potential().as_ref();
        let refine = self.cfg.histogram.refine;
        let n = self.dim();
        Ok(match kind {
            SamplerKind::Langevin => ("gibbs".into(), h.gibbs_reference(p, t.tau1, refine)?),
            SamplerKind::PtPosition => (
                "product_gibbs".into(),
                h.reference(|x| -p.energy(&x[..n]) / t.tau1 - p.energy(&x[n..]) / t.tau2, refine)?,
            ),
            SamplerKind::Isa | SamplerKind::PtTemperature => ("mu".into(), h.mu_reference(p, t, refine)?),
        })
    }

    fn axis_names(&self, particles: usize) -> Vec<String> {
        let n = self.dim();
        (1..=particles)
            .flat_map(|q| (0..n).map(move |k| if n == 1 { format!("x{q}") } else { format!("x{q}_{k}") }))
            .collect()
    }
}

/// Frozen-temperature run that also fills a histogram after burn-in.
fn occupation(
    ctx: &Context,
    kind: SamplerKind,
    t: TemperaturePair,
    swap_rate: f64,
    seed: u64,
    init: &ChainState,
    template: &Histogram,
    record: bool,
) -> Result<(Trajectory, Histogram), CliError> {
    let mut sampler = ctx.sampler(kind, t, swap_rate)?;
    let mut sde = ctx.sde(seed);
    if !record {
        sde.record.clear();
    }
    let mut h = template.clone();
    let mut step = 0u64;
    let burn_in = sde.burn_in;
    let mut noise = StreamNoise::new(seed, 0);
    let tr = run_chain_observed(&mut sampler, init.clone(), &sde, 0, &mut noise, &mut |s| {
        step += 1;
        if step > burn_in {
            h.add_state(s);
        }
    })?;
    for w in &tr.warnings {
        log::warn!("seed {seed}: {w}");
    }
    if h.total() == 0 {
        return Err(CliError::Numerical(format!(
            "seed {seed}: no state fell inside the histogram box after burn-in"
        )));
    }
    Ok((tr, h))
}

#[derive(Serialize)]
struct LandscapeSummary {
    n_minima: usize,
    dominating_minimum: usize,
    e_star: f64,
    delta_gap: f64,
    energy_offset: f64,
    minima: Vec<PointSummary>,
    critical_saddle: Option<PointSummary>,
    warnings: Vec<isa_core::landscape::LandscapeWarning>,
}

#[derive(Serialize)]
struct PointSummary {
    location: Vec<f64>,
    value: f64,
    hess_eigenvalues: Vec<f64>,
}

impl From<&CriticalPoint> for PointSummary {
    fn from(c: &CriticalPoint) -> Self {
        Self {
            location: c.location.clone(),
            value: c.value,
            hess_eigenvalues: c.hess_eigenvalues.clone(),
        }
    }
}

fn landscape_summary(l: &Landscape) -> LandscapeSummary {
    LandscapeSummary {
        n_minima: l.n_minima(),
        dominating_minimum: l.p,
        e_star: l.e_star,
        delta_gap: l.delta_gap,
        energy_offset: l.energy_offset,
        minima: l.minima.iter().map(PointSummary::from).collect(),
        critical_saddle: (l.n_minima() >= 2).then(|| l.critical_saddle().into()),
        warnings: l.warnings.clone(),
    }
}

#[derive(Serialize)]
struct PredictOutput {
    potential: String,
    tau1: f64,
    tau2: f64,
    k: f64,
    e_star: f64,
    poincare: EKPrediction,
    lsi: EKPrediction,
    langevin_poincare: EKPrediction,
    /// Predicted Langevin-over-isa ratio of `1 / gap`.
    speedup: f64,
    landscape: LandscapeSummary,
}

fn predict(ctx: &Context) -> Result<(), CliError> {
    ctx.require_barrier("predict")?;
    let l = &ctx.landscape;
    let t = ctx.temperatures(SamplerKind::Isa)?;
    let c = ctx.cfg.prediction.constants();
    let poincare = poincare_bound(l, &t, &c)?;
    let langevin = langevin_poincare_bound(l, t.tau1, &c)?;
    let out = PredictOutput {
        potential: ctx.cfg.potential.label(),
        tau1: t.tau1,
        tau2: t.tau2,
        k: t.ratio(),
        e_star: l.e_star,
        lsi: lsi_bound(l, &t, &c)?,
        speedup: speedup_ratio(&poincare, &langevin),
        poincare,
        langevin_poincare: langevin,
        landscape: landscape_summary(l),
    };
    write_json(&ctx.path("prediction.json"), &out)?;
    // A closed pipe on stdout is not an error; the file is already written.
    let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

#[derive(Serialize)]
struct SeedTv {
    seed: u64,
    tv: f64,
    counted: u64,
    outside: u64,
    counters: Counters,
    final_state: ChainState,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct TvOutput {
    sampler: SamplerKind,
    reference: String,
    tau1: f64,
    tau2: f64,
    swap_rate: f64,
    dt: f64,
    n_steps: u64,
    burn_in: u64,
    bins_per_axis: usize,
    refine: usize,
    per_seed: Vec<SeedTv>,
    pooled_tv: f64,
    tv: MeanCi,
}

fn sample(ctx: &Context) -> Result<(), CliError> {
    let kind = ctx.cfg.sampler.kind;
    let t = ctx.temperatures(kind)?;
    let a = ctx.cfg.sampler.swap_rate;
    let init = ctx.init(kind)?;
    let template = ctx.histogram(kind)?;
    let (ref_name, reference) = ctx.reference(kind, &t, &template)?;
    let runs = ctx
        .cfg
        .experiment
        .seeds
        .par_iter()
        .map(|&seed| occupation(ctx, kind, t, a, seed, &init, &template, true).map(|(tr, h)| (seed, tr, h)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut pooled = template.clone();
    let mut per_seed = Vec::new();
    for (seed, tr, h) in &runs {
        let header = tr.header();
        let rows: Vec<Vec<String>> = tr.records.iter().map(|r| tr.row(r).into_iter().map(num).collect()).collect();
        write_csv(&ctx.path(&format!("trajectory_seed{seed}.csv")), &header, &rows)?;
        pooled.merge(h)?;
        per_seed.push(SeedTv {
            seed: *seed,
            tv: tv_distance(&h.probabilities(), &reference)?,
            counted: h.total(),
            outside: h.outside,
            counters: tr.counters.clone(),
            final_state: tr.final_state.clone(),
            warnings: tr.warnings.clone(),
        });
    }

    let names = ctx.axis_names(kind.particles());
    let mut header = vec!["bin".to_string()];
    header.extend(names.iter().cloned());
    header.extend(["count", "empirical", "reference"].map(String::from));
    let probs = pooled.probabilities();
    let rows: Vec<Vec<String>> = (0..pooled.len())
        .map(|i| {
            let (corner, width) = pooled.bin_box(i);
            let mut r = vec![i.to_string()];
            r.extend(corner.iter().zip(&width).map(|(c, w)| num(c + 0.5 * w)));
            r.extend([pooled.counts[i].to_string(), num(probs[i]), num(reference[i])]);
            r
        })
        .collect();
    write_csv(&ctx.path("histogram.csv"), &header, &rows)?;

    let tvs: Vec<f64> = per_seed.iter().map(|s| s.tv).collect();
    let out = TvOutput {
        sampler: kind,
        reference: ref_name,
        tau1: t.tau1,
        tau2: t.tau2,
        swap_rate: a,
        dt: ctx.cfg.sde.dt,
        n_steps: ctx.cfg.sde.n_steps,
        burn_in: ctx.cfg.sde.burn_in,
        bins_per_axis: ctx.cfg.histogram.bins,
        refine: ctx.cfg.histogram.refine,
        pooled_tv: tv_distance(&probs, &reference)?,
        tv: mean_ci(&tvs, ctx.confidence()).expect("at least one seed"),
        per_seed,
    };
    write_json(&ctx.path("tv.json"), &out)
}

#[derive(Serialize)]
struct MethodSummary {
    method: SamplerKind,
    runs: u64,
    successes: u64,
    rate: f64,
    ci_low: f64,
    ci_high: f64,
}

#[derive(Serialize)]
struct PairedSummary {
    isa_only: u64,
    langevin_only: u64,
    sign_test_p: f64,
}

#[derive(Serialize)]
struct AnnealOutput {
    e: f64,
    k: f64,
    e_star: f64,
    delta: f64,
    /// Predicted exponent of the failure probability; `None` when the
    /// schedule is outside its range of validity.
    sa_exponent: Option<f64>,
    sa_exponent_note: Option<String>,
    dt: f64,
    n_steps: u64,
    final_time: f64,
    confidence: f64,
    methods: Vec<MethodSummary>,
    paired: Option<PairedSummary>,
}

struct AnnealPlan {
    e: f64,
    k: f64,
    delta: f64,
}

fn anneal_plan(ctx: &Context) -> Result<AnnealPlan, CliError> {
    let s = ctx
        .cfg
        .schedule
        .as_ref()
        .ok_or_else(|| CliError::Config("annealing needs a [schedule] section".into()))?;
    s.resolve()?;
    let delta = match ctx.cfg.anneal.delta {
        Some(d) => d,
        None => {
            ctx.require_barrier("a relative anneal.delta_factor")?;
            ctx.cfg.anneal.delta_factor * ctx.landscape.e_star
        }
    };
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(CliError::Config(format!("annealing threshold delta = {delta}")));
    }
    Ok(AnnealPlan { e: s.e, k: s.k, delta })
}

fn anneal_once(ctx: &Context, kind: SamplerKind, plan: &AnnealPlan, seed: u64) -> Result<(f64, bool, Option<f64>), CliError> {
    let mut sde = ctx.sde(seed);
    sde.record.clear();
    let p = ctx.potential().clone();
    let o = match kind {
        SamplerKind::Isa => anneal_isa(p, Schedule::logarithmic(plan.e, plan.k)?, ctx.init(kind)?, &sde, plan.delta, 0)?,
        SamplerKind::Langevin => {
            anneal_langevin(p, Schedule::logarithmic(plan.e, 1.0)?, ctx.init(kind)?, &sde, plan.delta, 0)?
        }
        other => return Err(CliError::Config(format!("annealing is not defined for `{}`", other.name()))),
    };
    Ok((o.final_energy, o.success, o.hitting_time))
}

fn anneal(ctx: &Context) -> Result<(), CliError> {
    let plan = anneal_plan(ctx)?;
    let mut methods = vec![SamplerKind::Isa];
    if ctx.cfg.anneal.baseline {
        methods.push(SamplerKind::Langevin);
    }
    let seeds = &ctx.cfg.experiment.seeds;
    let jobs: Vec<(SamplerKind, u64)> = methods.iter().flat_map(|&m| seeds.iter().map(move |&s| (m, s))).collect();
    let results = jobs
        .par_iter()
        .map(|&(m, s)| anneal_once(ctx, m, &plan, s))
        .collect::<Result<Vec<_>, _>>()?;

    let header: Vec<String> = ["method", "seed", "success", "hitting_time", "final_energy"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = jobs
        .iter()
        .zip(&results)
        .map(|(&(m, s), &(h, ok, hit))| vec![m.name().into(), s.to_string(), ok.to_string(), opt(hit), num(h)])
        .collect();
    write_csv(&ctx.path("anneal.csv"), &header, &rows)?;

    let conf = ctx.confidence();
    let summaries = methods
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let chunk = &results[i * seeds.len()..(i + 1) * seeds.len()];
            let k = chunk.iter().filter(|r| r.1).count() as u64;
            let n = chunk.len() as u64;
            let (lo, hi) = wilson_interval(k, n, conf);
            MethodSummary {
                method: m,
                runs: n,
                successes: k,
                rate: k as f64 / n as f64,
                ci_low: lo,
                ci_high: hi,
            }
        })
        .collect();
    let paired = ctx.cfg.anneal.baseline.then(|| {
        let (isa, lang) = results.split_at(seeds.len());
        let a = isa.iter().zip(lang).filter(|(x, y)| x.1 && !y.1).count() as u64;
        let b = isa.iter().zip(lang).filter(|(x, y)| !x.1 && y.1).count() as u64;
        PairedSummary {
            isa_only: a,
            langevin_only: b,
            sign_test_p: sign_test(a, b),
        }
    });
    let (sa, note) = match sa_exponent(plan.e, plan.k, ctx.landscape.e_star, plan.delta) {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let out = AnnealOutput {
        e: plan.e,
        k: plan.k,
        e_star: ctx.landscape.e_star,
        delta: plan.delta,
        sa_exponent: sa,
        sa_exponent_note: note,
        dt: ctx.cfg.sde.dt,
        n_steps: ctx.cfg.sde.n_steps,
        final_time: ctx.cfg.sde.dt * ctx.cfg.sde.n_steps as f64,
        confidence: conf,
        methods: summaries,
        paired,
    };
    write_json(&ctx.path("anneal.json"), &out)
}

/// Discretized form of `kind` on the configured grid.
fn form(ctx: &Context, kind: SamplerKind, t: &TemperaturePair) -> Result<DiscreteForm, CliError> {
    let p = ctx.potential();
    let g = &ctx.cfg.grid;
    let opts = FormOptions { max_nodes: g.max_nodes };
    let axis = Grid::over(p.domain(), g.nodes)?;
    Ok(match kind {
        SamplerKind::Langevin => assemble_langevin_form_with(p.as_ref(), t.tau1, &axis, &opts)?,
        SamplerKind::Isa => assemble_isa_form_with(p.as_ref(), t, &axis.product(&axis), &opts)?,
        other => {
            return Err(CliError::Config(format!(
                "`{}` has no reversible generator form; use langevin or isa",
                other.name()
            )))
        }
    })
}

fn predicted_bound(ctx: &Context, kind: SamplerKind, t: &TemperaturePair) -> Result<Option<f64>, CliError> {
    if ctx.landscape.n_minima() < 2 {
        return Ok(None);
    }
    let c = ctx.cfg.prediction.constants();
    Ok(match kind {
        SamplerKind::Langevin => Some(langevin_poincare_bound(&ctx.landscape, t.tau1, &c)?.bound_value),
        SamplerKind::Isa => Some(poincare_bound(&ctx.landscape, t, &c)?.bound_value),
        _ => None,
    })
}

#[derive(Serialize)]
struct GapOutput {
    form: SamplerKind,
    tau1: f64,
    tau2: f64,
    nodes_per_axis: Vec<usize>,
    unknowns: usize,
    lambda1: f64,
    relaxation_time: f64,
    solver: isa_core::spectral::SolverMethod,
    iterations: usize,
    residual: f64,
    outside_mass: f64,
    predicted_bound: Option<f64>,
    predicted_gap: Option<f64>,
}

fn spectrum(ctx: &Context) -> Result<(), CliError> {
    let kind = ctx.cfg.sampler.kind;
    let t = ctx.temperatures(kind)?;
    let form = form(ctx, kind, &t)?;
    let gap = spectral_gap(&form)?;
    let bound = predicted_bound(ctx, kind, &t)?;
    let out = GapOutput {
        form: kind,
        tau1: t.tau1,
        tau2: t.tau2,
        nodes_per_axis: form.grid.nodes_per_axis(),
        unknowns: gap.unknowns,
        lambda1: gap.lambda1,
        relaxation_time: 1.0 / gap.lambda1,
        solver: gap.method,
        iterations: gap.iterations,
        residual: gap.residual,
        outside_mass: form.outside_mass,
        predicted_bound: bound,
        predicted_gap: bound.map(|b| 1.0 / b),
    };
    write_json(&ctx.path("gap.json"), &out)?;
    if ctx.cfg.grid.export_matrix {
        export_form(ctx, &form, kind.particles())?;
    }
    Ok(())
}

fn export_form(ctx: &Context, form: &DiscreteForm, particles: usize) -> Result<(), CliError> {
    form.write_triplets(BufWriter::new(fs::File::create(ctx.path("triplets.txt"))?))?;
    form.write_mass(BufWriter::new(fs::File::create(ctx.path("mass.txt"))?))?;
    let mut header = vec!["node".to_string()];
    header.extend(ctx.axis_names(particles));
    header.push("mass".into());
    let mut x = vec![0.0; form.grid.dim()];
    let rows: Vec<Vec<String>> = (0..form.len())
        .map(|i| {
            form.grid.node(i, &mut x);
            let mut r = vec![i.to_string()];
            r.extend(x.iter().map(|v| num(*v)));
            r.push(num(form.mass[i]));
            r
        })
        .collect();
    write_csv(&ctx.path("density.csv"), &header, &rows)
}

fn compare(ctx: &Context) -> Result<(), CliError> {
    let t = ctx.temperatures(SamplerKind::Isa)?;
    let rates = if ctx.cfg.sampler.swap_rates.is_empty() {
        vec![1.0, 10.0, 100.0]
    } else {
        ctx.cfg.sampler.swap_rates.clone()
    };
    let mut methods = vec![(SamplerKind::Langevin, None), (SamplerKind::Isa, None)];
    for &a in &rates {
        methods.push((SamplerKind::PtPosition, Some(a)));
        methods.push((SamplerKind::PtTemperature, Some(a)));
    }
    let plan = ctx.cfg.schedule.as_ref().map(|_| anneal_plan(ctx)).transpose()?;
    let seeds = &ctx.cfg.experiment.seeds;

    let mut templates = Vec::new();
    for &(m, _) in &methods {
        let h = ctx.histogram(m)?;
        let r = ctx.reference(m, &t, &h)?.1;
        templates.push((h, r));
    }
    let jobs: Vec<(usize, u64)> = (0..methods.len()).flat_map(|i| seeds.iter().map(move |&s| (i, s))).collect();
    let tvs = jobs
        .par_iter()
        .map(|&(i, seed)| {
            let (m, a) = methods[i];
            let init = ctx.init(m)?;
            let (_, h) = occupation(ctx, m, t, a.unwrap_or(0.0), seed, &init, &templates[i].0, false)?;
            Ok(tv_distance(&h.probabilities(), &templates[i].1)?)
        })
        .collect::<Result<Vec<f64>, CliError>>()?;

    let mut results = Vec::new();
    for (i, &(m, a)) in methods.iter().enumerate() {
        let gap = match m {
            SamplerKind::Langevin | SamplerKind::Isa => Some(spectral_gap(&form(ctx, m, &t)?)?.lambda1),
            _ => None,
        };
        let anneal = match (&plan, m) {
            (Some(p), SamplerKind::Langevin | SamplerKind::Isa) => Some(
                seeds
                    .par_iter()
                    .map(|&s| anneal_once(ctx, m, p, s).map(|r| (s, r.1)))
                    .collect::<Result<Vec<_>, _>>()?,
            ),
            _ => None,
        };
        results.push(RunResult {
            potential: ctx.cfg.potential.label(),
            method: m,
            swap_rate: a,
            gap,
            predicted_bound: predicted_bound(ctx, m, &t)?,
            tv: seeds.iter().enumerate().map(|(j, &s)| (s, tvs[i * seeds.len() + j])).collect(),
            anneal,
        });
    }
    write_json(&ctx.path("runs.json"), &results)?;
    report_compare(&results, ctx.confidence())?.write_csv(&ctx.path("compare.csv"))
}

#[derive(Serialize)]
struct DeviationSeed {
    seed: u64,
    mu_mean: f64,
    mu_var: f64,
    rho: f64,
    density_norm: f64,
    exceedances: usize,
    prediction: EKPrediction,
}

fn deviation(ctx: &Context) -> Result<(), CliError> {
    ctx.require_barrier("deviation")?;
    if ctx.cfg.sampler.kind != SamplerKind::Isa {
        return Err(CliError::Config("deviation runs use the isa sampler only".into()));
    }
    let d = &ctx.cfg.deviation;
    let n = ctx.dim();
    if d.coordinate >= n {
        return Err(CliError::Config(format!("deviation.coordinate = {} but the dimension is {n}", d.coordinate)));
    }
    if !(d.scale > 0.0 && d.scale.is_finite()) {
        return Err(CliError::Config(format!("deviation.scale = {}", d.scale)));
    }
    let t = ctx.temperatures(SamplerKind::Isa)?;
    let initial = match d.initial {
        InitialChoice::Mu => InitialLaw::Mu,
        InitialChoice::Point => {
            let s = ctx.init(SamplerKind::Isa)?;
            InitialLaw::Point { x1: s.x1, x2: s.x2 }
        }
    };
    let (k, scale) = (d.coordinate, d.scale);
    let f = move |x1: &[f64], _: &[f64]| (x1[k] / scale).clamp(-1.0, 1.0);
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for &seed in &ctx.cfg.experiment.seeds {
        let cfg = DeviationConfig {
            horizons: d.horizons.clone(),
            radii: d.radii.clone(),
            n_replicas: d.replicas,
            dt: ctx.cfg.sde.dt,
            seed,
            initial: initial.clone(),
            grid_nodes: d.grid_nodes,
            confidence: ctx.confidence(),
            constants: ctx.cfg.prediction.constants(),
            stability_cap: ctx.cfg.sde.stability_cap,
        };
        let r = ergodic_deviation(&ctx.landscape, &t, &f, &cfg)?;
        let exceeds = |p: &DeviationPoint| p.estimate > p.scaled_bound;
        for p in &r.points {
            rows.push(vec![
                seed.to_string(),
                num(p.t),
                num(p.r),
                p.hits.to_string(),
                p.replicas.to_string(),
                num(p.estimate),
                num(p.ci_low),
                num(p.ci_high),
                num(p.bound),
                num(p.scaled_bound),
                exceeds(p).to_string(),
            ]);
        }
        summaries.push(DeviationSeed {
            seed,
            mu_mean: r.mu_mean,
            mu_var: r.mu_var,
            rho: r.rho,
            density_norm: r.density_norm,
            exceedances: r.points.iter().filter(|p| exceeds(p)).count(),
            prediction: r.prediction,
        });
    }
    let header: Vec<String> = [
        "seed",
        "t",
        "r",
        "hits",
        "replicas",
        "estimate",
        "ci_low",
        "ci_high",
        "bound",
        "scaled_bound",
        "exceeds_bound",
    ]
    .map(String::from)
    .to_vec();
    write_csv(&ctx.path("deviation.csv"), &header, &rows)?;
    write_json(&ctx.path("deviation.json"), &summaries)
}

