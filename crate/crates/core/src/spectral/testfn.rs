use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use super::form::{assemble_marginal_form_partial, FormOptions};
use super::{rayleigh_quotient, DiscreteForm, Grid, SpectralError};
use crate::gibbs::{grid_density_gibbs, log_add_exp, TemperaturePair};
use crate::landscape::{Landscape, Potential};

/// Width parameter of the transition layer in the 1D ansatz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaRule {
    /// `sigma = -1 / H''(s)`.
    Curvature,
    Fixed(f64),
}

/// Half-width of the transition layer around the saddle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaRule {
    /// `delta = sqrt(2 r0 tau2 |ln tau2|)`.
    LogScaled { r0: f64 },
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnsatzOptions {
    pub sigma: SigmaRule,
    pub delta: DeltaRule,
}

impl Default for AnsatzOptions {
    fn default() -> Self {
        Self {
            sigma: SigmaRule::Curvature,
            delta: DeltaRule::LogScaled { r0: 1.0 },
        }
    }
}

/// Two-plateau test functions for a 1D double well.
///
/// Both functions are constant outside `(s - delta, s + delta)` and follow a
/// Gaussian error-function ramp of variance `sigma tau2` inside. `g_pi` has
/// `E_{nu^tau1} g = 0`; `g_lsi` has `E_{nu^tau1} g^2 = 1`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Ansatz1d {
    pub axis: Grid,
    pub saddle: f64,
    pub sigma: f64,
    pub delta: f64,
    pub kappa: f64,
    /// Mass of `nu^tau1` right of the saddle, measured on the axis.
    pub z2_tau1: f64,
    pub g_pi: Vec<f64>,
    pub g_lsi: Vec<f64>,
    /// `|E g| / sqrt(E g^2)` for `g_pi`, under `nu^tau1`.
    pub pi_residual: f64,
    /// `|E g^2 - 1|` for `g_lsi`, under `nu^tau1`.
    pub lsi_residual: f64,
}

impl Ansatz1d {
    /// `f(x1, x2) = g(x1) g(x2)` on `axis x axis`.
    pub fn product(&self, g: &[f64]) -> Vec<f64> {
        let n = g.len();
        (0..n * n).map(|i| g[i % n] * g[i / n]).collect()
    }
}

fn ramp(x: f64, s: f64, delta: f64, width: f64, lo: f64, hi: f64) -> (f64, f64) {
    let edge = erf(delta / width);
    let kappa = 1.0 / edge;
    let v = if x <= s - delta {
        lo
    } else if x >= s + delta {
        hi
    } else {
        lo + (hi - lo) * 0.5 * kappa * (erf((x - s) / width) + edge)
    };
    (v, kappa)
}

pub fn ansatz_1d(
    l: &Landscape,
    t: &TemperaturePair,
    axis: &Grid,
    opts: &AnsatzOptions,
) -> Result<Ansatz1d, SpectralError> {
    if l.dim() != 1 || l.n_minima() != 2 {
        return Err(SpectralError::WrongTopology(format!(
            "need a 1D landscape with two minima, got dimension {} with {} minima",
            l.dim(),
            l.n_minima()
        )));
    }
    if axis.dim() != 1 {
        return Err(SpectralError::DimensionMismatch("axis must be one-dimensional".into()));
    }
    let s_pt = &l.saddles[0][1].saddle;
    let s = s_pt.location[0];
    let curv = s_pt.hess_eigenvalues[0];
    let sigma = match opts.sigma {
        SigmaRule::Curvature => -1.0 / curv,
        SigmaRule::Fixed(v) => v,
    };
    let delta = match opts.delta {
        DeltaRule::LogScaled { r0 } => (2.0 * r0 * t.tau2 * t.tau2.ln().abs()).sqrt(),
        DeltaRule::Fixed(v) => v,
    };
    if !(sigma > 0.0 && delta > 0.0) {
        return Err(SpectralError::InvalidArgument(format!(
            "sigma = {sigma}, delta = {delta}"
        )));
    }
    let width = (2.0 * sigma * t.tau2).sqrt();
    let nodes = axis.axis(0);
    let nu1 = grid_density_gibbs(l.potential().as_ref(), t.tau1, axis)?;
    // Basin masses; the global minimum is the left or right well.
    let left_global = l.minima[0].location[0] < s;
    let right: f64 = nodes.iter().zip(&nu1).filter(|(x, _)| **x > s).map(|(_, m)| m).sum();
    let left = 1.0 - right;
    let (z_global, z_other) = if left_global { (left, right) } else { (right, left) };
    if !(z_other > 0.0) {
        return Err(SpectralError::Gibbs(crate::gibbs::GibbsError::Underflow));
    }

    // Plateau at the global minimum first, at the other minimum second.
    let orient = |g_global: f64, g_other: f64| {
        if left_global {
            (g_global, g_other)
        } else {
            (g_other, g_global)
        }
    };
    let mut kappa = 1.0;
    let mut build = |g_global: f64, g_other: f64| -> Vec<f64> {
        let (lo, hi) = orient(g_global, g_other);
        nodes
            .iter()
            .map(|x| {
                let (v, k) = ramp(*x, s, delta, width, lo, hi);
                kappa = k;
                v
            })
            .collect()
    };

    let mut g_pi = build(-1.0, 1.0 / z_other);
    let mean: f64 = g_pi.iter().zip(&nu1).map(|(g, m)| g * m).sum();
    g_pi.iter_mut().for_each(|g| *g -= mean);
    let mean: f64 = g_pi.iter().zip(&nu1).map(|(g, m)| g * m).sum();
    let second: f64 = g_pi.iter().zip(&nu1).map(|(g, m)| g * g * m).sum();
    let pi_residual = mean.abs() / second.sqrt();

    let low = (z_other / z_global).sqrt();
    let mut g_lsi = build(low, 1.0 / low);
    let second: f64 = g_lsi.iter().zip(&nu1).map(|(g, m)| g * g * m).sum();
    g_lsi.iter_mut().for_each(|g| *g /= second.sqrt());
    let second: f64 = g_lsi.iter().zip(&nu1).map(|(g, m)| g * g * m).sum();

    Ok(Ansatz1d {
        axis: axis.clone(),
        saddle: s,
        sigma,
        delta,
        kappa,
        z2_tau1: z_other,
        g_pi,
        g_lsi,
        pi_residual,
        lsi_residual: (second - 1.0).abs(),
    })
}

/// Radial profile of the localized test function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HShape {
    /// `n = 2`: `1` on `[0, r0]`, `2 (1 - r^alpha)` on `[r0, 1]` with `r0^alpha = 1/2`.
    /// `n >= 3`: `1` on `[0, R]`, a cosine step down to `0` on `[R, 2R]`.
    Standard,
    /// `h = 1` everywhere; useless as a test function.
    Constant,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestFnOptions {
    pub max_nodes: usize,
    /// Smallest resolved length scale must span at least this many cells.
    pub min_cells: f64,
    /// Nodes per axis of the coarse grid used for off-box partition sums.
    pub coarse_nodes: usize,
}

impl Default for TestFnOptions {
    fn default() -> Self {
        Self {
            max_nodes: 160_000,
            min_cells: 3.0,
            coarse_nodes: 0,
        }
    }
}

/// A localized test function around the global minimum and its quotient on
/// the marginal isa form.
#[derive(Clone, Debug)]
pub struct LowerBoundTestFn {
    pub form: DiscreteForm,
    pub f: Vec<f64>,
    pub epsilon: f64,
    /// Radius (in whitened units of `sqrt(epsilon)`) where `h` starts to fall.
    pub plateau: f64,
    pub support: f64,
    pub variance: f64,
    pub energy: f64,
    /// `var / E`, a lower bound on `1 / rho`.
    pub quotient: f64,
}

/// Radius `R_n` with `exp(-R_n^2 / (2n)) = 1/2`.
pub fn radius_half(n: usize) -> f64 {
    (2.0 * n as f64 * std::f64::consts::LN_2).sqrt()
}

struct Profile {
    epsilon: f64,
    plateau: f64,
    support: f64,
    eval: Box<dyn Fn(f64) -> f64>,
}

fn profile(n: usize, t: &TemperaturePair, eta: f64, shape: HShape) -> Result<Profile, SpectralError> {
    let rn = radius_half(n);
    if shape == HShape::Constant {
        return Ok(Profile {
            epsilon: t.tau2,
            plateau: 1.0,
            support: 1.0,
            eval: Box::new(|_| 1.0),
        });
    }
    if n == 2 {
        let r0 = rn * (t.tau1 / t.tau2).sqrt();
        if !(r0 < 1.0) {
            return Err(SpectralError::InvalidArgument(format!(
                "tau2 / tau1 = {} must exceed R_2^2 = {}",
                t.ratio(),
                rn * rn
            )));
        }
        let alpha = std::f64::consts::LN_2 / (1.0 / r0).ln();
        Ok(Profile {
            epsilon: t.tau2,
            plateau: r0,
            support: 1.0,
            eval: Box::new(move |r| {
                if r <= r0 {
                    1.0
                } else if r < 1.0 {
                    2.0 * (1.0 - r.powf(alpha))
                } else {
                    0.0
                }
            }),
        })
    } else {
        if !(eta > 0.0 && eta < 0.5) {
            return Err(SpectralError::InvalidArgument(format!("eta = {eta} must lie in (0, 1/2)")));
        }
        let epsilon = t.tau1.powf(1.0 - eta) * t.tau2.powf(eta);
        Ok(Profile {
            epsilon,
            plateau: rn,
            support: 2.0 * rn,
            eval: Box::new(move |r| {
                if r <= rn {
                    1.0
                } else if r < 2.0 * rn {
                    0.5 * (1.0 + (std::f64::consts::PI * (r - rn) / rn).cos())
                } else {
                    0.0
                }
            }),
        })
    }
}

/// `ln sum exp(-H/tau) vol` over the nodes of `grid`, optionally skipping
/// nodes inside `[lo, hi]`.
fn log_partition(p: &dyn Potential, tau: f64, grid: &Grid, skip: Option<(&[f64], &[f64])>) -> f64 {
    let mut x = vec![0.0; grid.dim()];
    let mut z = f64::NEG_INFINITY;
    for i in 0..grid.len() {
        grid.node(i, &mut x);
        if let Some((lo, hi)) = skip {
            if x.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| *v >= *a && *v <= *b) {
                continue;
            }
        }
        z = log_add_exp(z, -p.energy(&x) / tau + grid.cell_volume(i).ln());
    }
    z
}

/// Radial test function `f(x) = h(|x - m|_H / sqrt(eps))` around the global
/// minimum, where `|y|_H^2 = y^T Hess H(m) y` whitens the basin.
///
/// The function lives on a local box just covering its support; partition
/// sums include the rest of the domain through a coarse grid.
pub fn lower_bound_testfn(
    l: &Landscape,
    t: &TemperaturePair,
    eta: f64,
    shape: HShape,
    opts: &TestFnOptions,
) -> Result<LowerBoundTestFn, SpectralError> {
    let n = l.dim();
    if !(2..=3).contains(&n) {
        return Err(SpectralError::WrongTopology(format!(
            "radial test functions need dimension 2 or 3, got {n}"
        )));
    }
    let prof = profile(n, t, eta, shape)?;
    let m = &l.minima[0];
    let hess = DMatrix::from_row_slice(n, n, &m.hessian);
    let eig = SymmetricEigen::new(hess.clone());
    let lam_max = eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(*v));
    let cov = hess
        .clone()
        .try_inverse()
        .ok_or(SpectralError::InvalidArgument("singular Hessian at the minimum".into()))?;

    let p = l.potential();
    let domain = p.domain();
    let reach = prof.support * prof.epsilon.sqrt() * 1.05;
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    for k in 0..n {
        let half = reach * cov[(k, k)].sqrt();
        lo[k] = (m.location[k] - half).max(domain.lo[k]);
        hi[k] = (m.location[k] + half).min(domain.hi[k]);
    }
    let per_axis = (opts.max_nodes as f64).powf(1.0 / n as f64).floor() as usize;
    let grid = Grid::uniform(&lo, &hi, &vec![per_axis; n])?;
    let h_max = (0..n).map(|k| grid.spacing(k)).fold(0.0_f64, f64::max);
    let scale = if shape == HShape::Constant {
        f64::INFINITY
    } else {
        let inner = prof.plateau * prof.epsilon.sqrt() / lam_max.sqrt();
        let ramp = (prof.support - prof.plateau) * prof.epsilon.sqrt() / lam_max.sqrt();
        inner.min(ramp)
    };
    let cells = scale / h_max;
    if cells < opts.min_cells {
        return Err(SpectralError::RatioTooLarge {
            ratio: t.ratio(),
            cells,
        });
    }

    let coarse_nodes = if opts.coarse_nodes > 0 {
        opts.coarse_nodes
    } else {
        per_axis.min(401)
    };
    let coarse = Grid::over(domain, coarse_nodes)?;
    let log_z = |tau: f64| {
        log_add_exp(
            log_partition(p.as_ref(), tau, &grid, None),
            log_partition(p.as_ref(), tau, &coarse, Some((&lo, &hi))),
        )
    };
    let (lz1, lz2) = (log_z(t.tau1), log_z(t.tau2));
    let form = assemble_marginal_form_partial(
        p.as_ref(),
        t,
        &grid,
        lz1,
        lz2,
        &FormOptions {
            max_nodes: opts.max_nodes,
        },
    )?;

    let mut x = vec![0.0; n];
    let inv_sqrt_eps = 1.0 / prof.epsilon.sqrt();
    let f: Vec<f64> = (0..grid.len())
        .map(|i| {
            grid.node(i, &mut x);
            let d: Vec<f64> = x.iter().zip(&m.location).map(|(a, b)| a - b).collect();
            let mut q = 0.0;
            for a in 0..n {
                for b in 0..n {
                    q += d[a] * hess[(a, b)] * d[b];
                }
            }
            (prof.eval)(q.max(0.0).sqrt() * inv_sqrt_eps)
        })
        .collect();
    if shape == HShape::Constant {
        // f is 1 off the box as well, so the off-grid mass does not count as 0.
        let mut whole = form.clone();
        whole.outside_mass = 0.0;
        rayleigh_quotient(&f, &whole)?;
    }
    let rq = rayleigh_quotient(&f, &form)?;
    let variance = form.variance(&f);
    let energy = form.dirichlet_energy(&f);
    Ok(LowerBoundTestFn {
        form,
        f,
        epsilon: prof.epsilon,
        plateau: prof.plateau,
        support: prof.support,
        variance,
        energy,
        quotient: 1.0 / rq,
    })
}
