use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{CriticalKind, CriticalPoint, LandscapeError, Potential};

#[derive(Clone, Debug)]
pub struct CriticalPointOptions {
    pub seeds_per_axis: usize,
    pub grad_tol: f64,
    pub morse_tol: f64,
    /// Defaults to `1e-5 * diameter` of the domain box.
    pub dedup_radius: Option<f64>,
    pub max_iter: usize,
}

impl Default for CriticalPointOptions {
    fn default() -> Self {
        Self {
            seeds_per_axis: 21,
            grad_tol: 1e-8,
            morse_tol: 1e-6,
            dedup_radius: None,
            max_iter: 100,
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Newton iteration on `grad H = 0` from `start`.
///
/// Steps are solved through the symmetric eigendecomposition so indefinite
/// Hessians are handled, and capped at a tenth of the box diameter. Returns
/// `None` if the iterate leaves the box, meets a singular Hessian, or is not
/// within `grad_tol` after `max_iter` steps.
pub fn newton_refine(
    p: &dyn Potential,
    start: &[f64],
    grad_tol: f64,
    max_iter: usize,
) -> Option<Vec<f64>> {
    let n = p.dim();
    let domain = p.domain();
    let cap = 0.1 * domain.diameter();
    let slack: Vec<f64> = domain
        .lo
        .iter()
        .zip(&domain.hi)
        .map(|(a, b)| 1e-6 * (b - a))
        .collect();
    let mut x = start.to_vec();
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n * n];
    for _ in 0..=max_iter {
        p.gradient(&x, &mut g);
        if !g.iter().all(|v| v.is_finite()) {
            return None;
        }
        let gnorm = norm(&g);
        if gnorm <= grad_tol {
            return Some(polish(p, x, gnorm));
        }
        p.hessian(&x, &mut h);
        let eig = DMatrix::from_row_slice(n, n, &h).symmetric_eigen();
        let scale = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return None;
        }
        let gv = DVector::from_column_slice(&g);
        let coords = eig.eigenvectors.transpose() * gv;
        let mut step = DVector::zeros(n);
        for k in 0..n {
            let lam = eig.eigenvalues[k];
            if lam.abs() <= 1e-14 * scale {
                return None;
            }
            step += eig.eigenvectors.column(k) * (coords[k] / lam);
        }
        let len = step.norm();
        if len > cap {
            step *= cap / len;
        }
        for k in 0..n {
            x[k] -= step[k];
        }
        let inside = x
            .iter()
            .enumerate()
            .all(|(k, v)| *v >= domain.lo[k] - slack[k] && *v <= domain.hi[k] + slack[k]);
        if !inside {
            return None;
        }
    }
    None
}

/// Up to two extra Newton steps once converged, kept only while they reduce
/// the gradient.
fn polish(p: &dyn Potential, mut x: Vec<f64>, mut gnorm: f64) -> Vec<f64> {
    let n = p.dim();
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n * n];
    for _ in 0..2 {
        if gnorm == 0.0 {
            break;
        }
        p.gradient(&x, &mut g);
        p.hessian(&x, &mut h);
        let hm = DMatrix::from_row_slice(n, n, &h);
        let Some(step) = hm.lu().solve(&DVector::from_column_slice(&g)) else {
            break;
        };
        let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a - s).collect();
        p.gradient(&trial, &mut g);
        let tn = norm(&g);
        if !(tn < gnorm) {
            break;
        }
        x = trial;
        gnorm = tn;
    }
    x
}

/// Deterministic grid of `per_axis^n` cell-centred seeds.
pub(crate) fn seed_grid(p: &dyn Potential, per_axis: usize) -> Vec<Vec<f64>> {
    let d = p.domain();
    let n = p.dim();
    let total = per_axis.pow(n as u32);
    (0..total)
        .map(|mut idx| {
            (0..n)
                .map(|k| {
                    let i = idx % per_axis;
                    idx /= per_axis;
                    d.lo[k] + (i as f64 + 0.5) / per_axis as f64 * (d.hi[k] - d.lo[k])
                })
                .collect()
        })
        .collect()
}

/// Locate critical points by Newton refinement from a seed grid.
///
/// Results are sorted lexicographically by location, deduplicated within the
/// dedup radius and Morse-checked.
pub fn find_critical_points(
    p: &dyn Potential,
    opts: &CriticalPointOptions,
) -> Result<Vec<CriticalPoint>, LandscapeError> {
    if opts.seeds_per_axis < 3 {
        return Err(LandscapeError::InvalidPotential(format!(
            "seeds_per_axis must be at least 3, got {}",
            opts.seeds_per_axis
        )));
    }
    let domain = p.domain();
    let radius = opts.dedup_radius.unwrap_or(1e-5 * domain.diameter());
    let seeds = seed_grid(p, opts.seeds_per_axis);
    let converged: Vec<Option<Vec<f64>>> = seeds
        .par_iter()
        .map(|s| newton_refine(p, s, opts.grad_tol, opts.max_iter))
        .collect();

    let mut points: Vec<Vec<f64>> = Vec::new();
    for (seed, res) in seeds.iter().zip(converged) {
        match res {
            Some(x) if domain.contains(&x) => points.push(x),
            Some(x) => log::debug!("seed {seed:?} converged outside the box at {x:?}"),
            None => log::debug!("seed {seed:?} did not converge"),
        }
    }
    points.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut unique: Vec<Vec<f64>> = Vec::new();
    for x in points {
        let dup = unique.iter().any(|u| {
            u.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() <= radius
        });
        if !dup {
            unique.push(x);
        }
    }

    let mut out = Vec::with_capacity(unique.len());
    for x in unique {
        let cp = CriticalPoint::at(p, &x);
        let smallest = cp.min_abs_eigenvalue();
        if smallest < opts.morse_tol {
            return Err(LandscapeError::MorseViolation {
                location: x,
                eigenvalue: smallest,
            });
        }
        out.push(cp);
    }
    if !out.iter().any(|c| c.kind == CriticalKind::Minimum) {
        return Err(LandscapeError::NoMinimum);
    }
    Ok(out)
}
