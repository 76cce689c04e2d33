use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    stream, wilson_interval, ChainState, DynamicsError, NoiseSource, Sampler, SamplerKind,
    Schedule, StreamNoise, BLOCK_INIT,
};
use crate::gibbs::{grid_density_mu, log_mu_from_energies, TemperaturePair};
use crate::kramers::{poincare_bound, EKPrediction, PredictionConstants};
use crate::landscape::{Landscape, Potential};
use crate::spectral::Grid;

/// Starting distribution of the replicas.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum InitialLaw {
    /// Both particles at fixed points; `dnu/dmu` is then not square integrable.
    Point { x1: Vec<f64>, x2: Vec<f64> },
    /// Cell-wise uniform law with the grid masses of `mu`.
    Mu,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationConfig {
    pub horizons: Vec<f64>,
    pub radii: Vec<f64>,
    pub n_replicas: u64,
    pub dt: f64,
    pub seed: u64,
    pub initial: InitialLaw,
    /// Grid nodes per axis for the `mu` average and the initial law.
    pub grid_nodes: usize,
    /// Two-sided level of the Wilson interval.
    pub confidence: f64,
    pub constants: PredictionConstants,
    pub stability_cap: Option<f64>,
}

impl Default for DeviationConfig {
    fn default() -> Self {
        Self {
            horizons: vec![10.0],
            radii: vec![0.5],
            n_replicas: 100,
            dt: 1e-3,
            seed: 0,
            initial: InitialLaw::Mu,
            grid_nodes: 200,
            confidence: 0.95,
            constants: PredictionConstants::default(),
            stability_cap: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationPoint {
    /// Simulated averaging time, a whole number of steps.
    pub t: f64,
    pub r: f64,
    pub hits: u64,
    pub replicas: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `exp(-t R^2 rho / (8 var_mu f))`.
    pub bound: f64,
    /// `bound * ||dnu/dmu||`.
    pub scaled_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub points: Vec<DeviationPoint>,
    pub mu_mean: f64,
    pub mu_var: f64,
    pub rho: f64,
    /// `||dnu/dmu||` in `L2(mu)`.
    pub density_norm: f64,
    pub prediction: EKPrediction,
}

/// Sampler for the cell-wise uniform approximation of `mu` on a grid.
#[derive(Clone, Debug)]
pub struct MuSampler {
    grid: Grid,
    mass: Vec<f64>,
    cdf: Vec<f64>,
    n: usize,
}

impl MuSampler {
    pub fn new(p: &dyn Potential, t: &TemperaturePair, nodes: usize) -> Result<Self, DynamicsError> {
        let n = p.dim();
        let d = p.domain();
        let lo: Vec<f64> = d.lo.iter().chain(&d.lo).copied().collect();
        let hi: Vec<f64> = d.hi.iter().chain(&d.hi).copied().collect();
        let grid = Grid::uniform(&lo, &hi, &vec![nodes; 2 * n])
            .map_err(|e| DynamicsError::InvalidConfig(e.to_string()))?;
        let mass = grid_density_mu(p, t, &grid)?;
        let mut acc = 0.0;
        let cdf = mass
            .iter()
            .map(|m| {
                acc += m;
                acc
            })
            .collect();
        Ok(Self { grid, mass, cdf, n })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    /// Bounds of the node-centred cell of node index `idx` on axis `k`.
    fn cell(&self, k: usize, idx: usize) -> (f64, f64) {
        let x = self.grid.axis(k)[idx];
        let h = 0.5 * self.grid.spacing(k);
        let (lo, hi) = (self.grid.axis(k)[0], *self.grid.axis(k).last().unwrap());
        ((x - h).max(lo), (x + h).min(hi))
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> ChainState {
        let u: f64 = rng.random::<f64>() * self.cdf.last().copied().unwrap_or(1.0);
        let i = self.cdf.partition_point(|c| *c <= u).min(self.cdf.len() - 1);
        let mut x = Vec::with_capacity(2 * self.n);
        for k in 0..2 * self.n {
            let (a, b) = self.cell(k, self.grid.axis_index(i, k));
            x.push(a + (b - a) * rng.random::<f64>());
        }
        let x2 = x.split_off(self.n);
        ChainState::pair(x, x2)
    }

    /// `||dnu/dmu||` in `L2(mu)` of the sampled law, with `refine` midpoint
    /// sub-samples per axis and cell.
    pub fn density_norm(&self, p: &dyn Potential, t: &TemperaturePair, refine: usize) -> f64 {
        let (n, d) = (self.n, 2 * self.n);
        let refine = refine.max(1);
        let sub = refine.pow(d as u32);
        let lmu = |x: &[f64]| log_mu_from_energies(t, p.energy(&x[..n]), p.energy(&x[n..]));
        let mut node = vec![0.0; d];
        let mut x = vec![0.0; d];
        let (mut z_grid, mut z_fine, mut sum) = (0.0, 0.0, 0.0);
        let mut shift = None;
        for i in 0..self.grid.len() {
            if self.mass[i] == 0.0 {
                continue;
            }
            self.grid.node(i, &mut node);
            let l0 = lmu(&node);
            let s = *shift.get_or_insert(l0);
            let cells: Vec<(f64, f64)> = (0..d).map(|k| self.cell(k, self.grid.axis_index(i, k))).collect();
            let vol: f64 = cells.iter().map(|(a, b)| b - a).product();
            let (mut fine, mut inv) = (0.0, 0.0);
            for q in 0..sub {
                let mut r = q;
                for k in 0..d {
                    let (a, b) = cells[k];
                    x[k] = a + ((r % refine) as f64 + 0.5) * (b - a) / refine as f64;
                    r /= refine;
                }
                let lq = lmu(&x);
                fine += (lq - s).exp();
                inv += (l0 - lq).exp();
            }
            z_grid += vol * (l0 - s).exp();
            z_fine += vol * fine / sub as f64;
            sum += self.mass[i] * inv / sub as f64;
        }
        (sum * z_fine / z_grid).sqrt()
    }
}

/// Tail estimates of `P(time average of f - mu(f) >= R)` for the isa at
/// frozen temperatures, with the spectral-gap deviation bound.
///
/// `f(x1, x2)` must satisfy `sup |f| <= 1`; this is checked on the grid. The
/// time average over `[0, t]` is the left-endpoint sum over whole steps.
pub fn ergodic_deviation(
    l: &Landscape,
    t: &TemperaturePair,
    f: &(dyn Fn(&[f64], &[f64]) -> f64 + Sync),
    cfg: &DeviationConfig,
) -> Result<DeviationReport, DynamicsError> {
    if !(cfg.dt > 0.0) || cfg.n_replicas == 0 || cfg.horizons.iter().any(|h| !(*h > 0.0)) {
        return Err(DynamicsError::InvalidConfig(
            "deviation run needs dt > 0, positive horizons and at least one replica".into(),
        ));
    }
    let p = l.potential().clone();
    let n = p.dim();
    let mu = MuSampler::new(p.as_ref(), t, cfg.grid_nodes)?;
    let mut node = vec![0.0; 2 * n];
    let (mut mean, mut sup) = (0.0, 0.0f64);
    let mut fv = Vec::with_capacity(mu.grid.len());
    for i in 0..mu.grid.len() {
        mu.grid.node(i, &mut node);
        let v = f(&node[..n], &node[n..]);
        sup = sup.max(v.abs());
        mean += mu.mass[i] * v;
        fv.push(v);
    }
    if !(sup <= 1.0 + 1e-12) {
        return Err(DynamicsError::InvalidConfig(format!(
            "observable must satisfy sup |f| <= 1, found {sup} on the grid"
        )));
    }
    let var: f64 = fv.iter().zip(&mu.mass).map(|(v, m)| m * (v - mean) * (v - mean)).sum();
    let prediction = poincare_bound(l, t, &cfg.constants)?;
    let rho = 1.0 / prediction.bound_value;
    let density_norm = match &cfg.initial {
        InitialLaw::Mu => mu.density_norm(p.as_ref(), t, 4),
        InitialLaw::Point { .. } => f64::INFINITY,
    };

    let steps: Vec<u64> = cfg.horizons.iter().map(|h| ((h / cfg.dt).round() as u64).max(1)).collect();
    let max_steps = *steps.iter().max().unwrap();
    let sched = Schedule::frozen(*t);
    let averages: Vec<Vec<f64>> = (0..cfg.n_replicas)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>, DynamicsError> {
            let mut init_rng = stream(cfg.seed, r, BLOCK_INIT);
            let mut s = match &cfg.initial {
                InitialLaw::Mu => mu.sample(&mut init_rng),
                InitialLaw::Point { x1, x2 } => ChainState::pair(x1.clone(), x2.clone()),
            };
            let mut sampler = Sampler::new(SamplerKind::Isa, p.clone(), sched, 0.0, cfg.stability_cap)?;
            sampler.check_state(&s)?;
            let mut noise = StreamNoise::new(cfg.seed, r);
            let mut out = vec![0.0; steps.len()];
            let mut acc = 0.0;
            for k in 1..=max_steps {
                acc += f(&s.x1, &s.x2);
                for (o, n) in out.iter_mut().zip(&steps) {
                    if *n == k {
                        *o = acc / k as f64;
                    }
                }
                if k < max_steps {
                    sampler.step(&mut s, cfg.dt, &mut noise as &mut dyn NoiseSource)?;
                }
            }
            Ok(out)
        })
        .collect::<Result<_, _>>()?;

    let mut points = Vec::new();
    for (h, n) in steps.iter().enumerate() {
        let tt = *n as f64 * cfg.dt;
        for &r in &cfg.radii {
            let hits = averages.iter().filter(|a| a[h] - mean >= r).count() as u64;
            let (ci_low, ci_high) = wilson_interval(hits, cfg.n_replicas, cfg.confidence);
            let bound = if var > 0.0 { (-tt * r * r * rho / (8.0 * var)).exp() } else { 0.0 };
            points.push(DeviationPoint {
                t: tt,
                r,
                hits,
                replicas: cfg.n_replicas,
                estimate: hits as f64 / cfg.n_replicas as f64,
                ci_low,
                ci_high,
                bound,
                scaled_bound: bound * density_norm,
            });
        }
    }
    Ok(DeviationReport {
        points,
        mu_mean: mean,
        mu_var: var,
        rho,
        density_norm,
        prediction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::{build_landscape, corpus_potential, LandscapeOptions};

    fn landscape() -> Landscape {
        build_landscape(corpus_potential("tilted_double_well").unwrap(), &LandscapeOptions::default()).unwrap()
    }

    fn clamp1(x1: &[f64], _x2: &[f64]) -> f64 {
        x1[0].clamp(-1.0, 1.0)
    }

    #[test]
    fn mu_law_has_unit_density_norm() {
        let l = landscape();
        let t = TemperaturePair::new(0.15, 0.45).unwrap();
        let s = MuSampler::new(l.potential().as_ref(), &t, 120).unwrap();
        let norm = s.density_norm(l.potential().as_ref(), &t, 4);
        assert!((norm - 1.0).abs() < 0.02, "{norm}");
        let mut rng = stream(3, 0, BLOCK_INIT);
        let st = s.sample(&mut rng);
        assert!(l.potential().domain().contains(&st.x1) && l.potential().domain().contains(&st.x2));
    }

    #[test]
    fn impossible_radius_and_short_horizon() {
        let l = landscape();
        let t = TemperaturePair::new(0.15, 0.45).unwrap();
        let cfg = DeviationConfig {
            horizons: vec![1e-3],
            radii: vec![2.5, -10.0],
            n_replicas: 400,
            grid_nodes: 100,
            ..Default::default()
        };
        let r = ergodic_deviation(&l, &t, &clamp1, &cfg).unwrap();
        assert_eq!(r.points[0].estimate, 0.0);
        assert_eq!(r.points[1].estimate, 1.0);
        // One step: the average is f at the initial state, so P(avg >= mean)
        // is the mu mass of that event.
        let cfg = DeviationConfig {
            radii: vec![0.0],
            ..cfg
        };
        let r = ergodic_deviation(&l, &t, &clamp1, &cfg).unwrap();
        let s = MuSampler::new(l.potential().as_ref(), &t, 100).unwrap();
        let mut x = vec![0.0; 2];
        let want: f64 = (0..s.grid.len())
            .filter(|&i| {
                s.grid.node(i, &mut x);
                x[0].clamp(-1.0, 1.0) >= r.mu_mean
            })
            .map(|i| s.mass[i])
            .sum();
        let p = &r.points[0];
        assert!(p.ci_low - 0.03 <= want && want <= p.ci_high + 0.03, "{want} vs {p:?}");
    }

    #[test]
    fn unbounded_observable_is_rejected() {
        let l = landscape();
        let t = TemperaturePair::new(0.15, 0.45).unwrap();
        let cfg = DeviationConfig {
            n_replicas: 1,
            grid_nodes: 40,
            ..Default::default()
        };
        let big = |x1: &[f64], _: &[f64]| 3.0 * x1[0];
        assert!(ergodic_deviation(&l, &t, &big, &cfg).is_err());
    }
}
