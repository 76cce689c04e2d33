//! Saddle heights `inf over paths of max H` between two minima.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::critical::newton_refine;
use super::{CriticalKind, CriticalPoint, LandscapeError, Potential};

#[derive(Clone, Debug)]
pub struct SaddleOptions {
    /// Scan points on `[a, b]` for the 1D search.
    pub scan_points: usize,
    /// Two maxima closer than this in height violate uniqueness.
    pub height_tol: f64,
    /// Nodes per axis for the n-dimensional bottleneck search.
    pub grid_resolution: usize,
    pub grad_tol: f64,
    pub morse_tol: f64,
}

impl Default for SaddleOptions {
    fn default() -> Self {
        Self {
            scan_points: 20_000,
            height_tol: 1e-9,
            grid_resolution: 121,
            grad_tol: 1e-8,
            morse_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SaddleSearch {
    pub height: f64,
    pub saddle: CriticalPoint,
    /// False when Newton refinement failed and `saddle` is the raw grid node.
    pub refined: bool,
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// 1D saddle height between the minima at `a` and `b`.
///
/// Dense scan for local maxima, golden-section bracketing, then Newton polish
/// on `H'`. The returned point must have `H'' < 0`.
pub fn saddle_height_1d(
    p: &dyn Potential,
    a: f64,
    b: f64,
    opts: &SaddleOptions,
) -> Result<SaddleSearch, LandscapeError> {
    if p.dim() != 1 {
        return Err(LandscapeError::WrongDimension {
            expected: "1".into(),
            got: p.dim(),
        });
    }
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    if hi - lo <= 1e-12 * (1.0 + lo.abs()) {
        let s = CriticalPoint::at(p, &[a]);
        return Ok(SaddleSearch {
            height: s.value,
            saddle: s,
            refined: true,
        });
    }
    let m = opts.scan_points.max(10_000);
    let xs: Vec<f64> = (0..=m).map(|i| lo + (hi - lo) * i as f64 / m as f64).collect();
    let hs: Vec<f64> = xs.iter().map(|x| p.energy(&[*x])).collect();
    let h = |x: f64| p.energy(&[x]);

    let mut maxima: Vec<(f64, f64)> = Vec::new();
    for i in 1..m {
        if hs[i] >= hs[i - 1] && hs[i] > hs[i + 1] {
            let x0 = golden_max(h, xs[i - 1], xs[i + 1]);
            let x = newton_refine(p, &[x0], opts.grad_tol, 50)
                .map(|v| v[0])
                .filter(|v| (v - x0).abs() <= 2.0 * (hi - lo) / m as f64)
                .unwrap_or(x0);
            maxima.push((x, h(x)));
        }
    }
    if maxima.is_empty() {
        return Err(LandscapeError::NoSaddle { a, b });
    }
    let top = maxima
        .iter()
        .copied()
        .max_by(|u, v| u.1.total_cmp(&v.1))
        .unwrap();
    let ties: Vec<f64> = maxima
        .iter()
        .filter(|(x, v)| (top.1 - v).abs() <= opts.height_tol && (x - top.0).abs() > 1e-9)
        .map(|t| t.1)
        .collect();
    if !ties.is_empty() {
        let mut heights = vec![top.1];
        heights.extend(ties);
        return Err(LandscapeError::NonUniqueSaddle { heights });
    }
    let s = CriticalPoint::at(p, &[top.0]);
    let grad = p.gradient_vec(&[top.0])[0].abs();
    if s.kind != CriticalKind::Saddle || grad > opts.grad_tol.max(1e-6) {
        return Err(LandscapeError::RefinementFailed { location: vec![top.0] });
    }
    if s.min_abs_eigenvalue() < opts.morse_tol {
        return Err(LandscapeError::MorseViolation {
            location: vec![top.0],
            eigenvalue: s.min_abs_eigenvalue(),
        });
    }
    Ok(SaddleSearch {
        height: s.value,
        saddle: s,
        refined: true,
    })
}

#[derive(Clone, Copy, PartialEq)]
struct Frontier {
    cost: f64,
    node: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on cost, ties broken by node id for determinism.
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Regular grid over the domain box with `res` nodes per axis.
pub(crate) struct NodeGrid {
    pub res: usize,
    pub dim: usize,
    pub lo: Vec<f64>,
    pub step: Vec<f64>,
}

impl NodeGrid {
    pub fn over(p: &dyn Potential, res: usize) -> Self {
        let d = p.domain();
        Self {
            res,
            dim: p.dim(),
            lo: d.lo.clone(),
            step: d
                .lo
                .iter()
                .zip(&d.hi)
                .map(|(a, b)| (b - a) / (res - 1) as f64)
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.res.pow(self.dim as u32)
    }

    pub fn coords(&self, mut idx: usize, out: &mut [f64]) {
        for k in 0..self.dim {
            out[k] = self.lo[k] + (idx % self.res) as f64 * self.step[k];
            idx /= self.res;
        }
    }

    pub fn nearest(&self, x: &[f64]) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for k in 0..self.dim {
            let i = ((x[k] - self.lo[k]) / self.step[k]).round();
            let i = i.clamp(0.0, (self.res - 1) as f64) as usize;
            idx += i * stride;
            stride *= self.res;
        }
        idx
    }

    pub fn neighbours(&self, idx: usize, out: &mut Vec<usize>) {
        out.clear();
        let mut stride = 1;
        for _ in 0..self.dim {
            let i = (idx / stride) % self.res;
            if i > 0 {
                out.push(idx - stride);
            }
            if i + 1 < self.res {
                out.push(idx + stride);
            }
            stride *= self.res;
        }
    }
}

/// Minimax path value and bottleneck node between two grid nodes.
///
/// Path cost is the largest node energy along the path; this is Dijkstra with
/// `max` in place of `+`.
pub(crate) fn bottleneck_path(
    grid: &NodeGrid,
    values: &[f64],
    from: usize,
    to: usize,
) -> (f64, usize) {
    let mut best = vec![f64::INFINITY; values.len()];
    let mut prev = vec![usize::MAX; values.len()];
    let mut heap = BinaryHeap::new();
    best[from] = values[from];
    heap.push(Frontier {
        cost: values[from],
        node: from,
    });
    let mut nb = Vec::with_capacity(2 * grid.dim);
    while let Some(Frontier { cost, node }) = heap.pop() {
        if cost > best[node] {
            continue;
        }
        if node == to {
            break;
        }
        grid.neighbours(node, &mut nb);
        for &j in &nb {
            let c = cost.max(values[j]);
            if c < best[j] {
                best[j] = c;
                prev[j] = node;
                heap.push(Frontier { cost: c, node: j });
            }
        }
    }
    let mut node = to;
    let mut arg = to;
    while node != usize::MAX {
        if values[node] > values[arg] {
            arg = node;
        }
        if node == from {
            break;
        }
        node = prev[node];
    }
    (best[to], arg)
}

/// n-dimensional saddle height via a bottleneck path on the grid graph,
/// followed by Newton refinement of the bottleneck node.
///
/// When refinement fails the grid bottleneck is returned with `refined = false`.
pub fn saddle_height_nd(
    p: &dyn Potential,
    a: &[f64],
    b: &[f64],
    opts: &SaddleOptions,
) -> Result<SaddleSearch, LandscapeError> {
    if p.dim() < 2 {
        return Err(LandscapeError::WrongDimension {
            expected: ">= 2".into(),
            got: p.dim(),
        });
    }
    let dist: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
    if dist <= 1e-12 {
        let s = CriticalPoint::at(p, a);
        return Ok(SaddleSearch {
            height: s.value,
            saddle: s,
            refined: true,
        });
    }
    let grid = NodeGrid::over(p, opts.grid_resolution.max(3));
    let mut x = vec![0.0; p.dim()];
    let values: Vec<f64> = (0..grid.len())
        .map(|i| {
            grid.coords(i, &mut x);
            p.energy(&x)
        })
        .collect();
    let (grid_height, node) = bottleneck_path(&grid, &values, grid.nearest(a), grid.nearest(b));
    grid.coords(node, &mut x);

    let refined = newton_refine(p, &x, opts.grad_tol, 100)
        .map(|s| CriticalPoint::at(p, &s))
        .filter(|cp| {
            let near: f64 = cp
                .location
                .iter()
                .zip(&x)
                .zip(&grid.step)
                .map(|((u, v), h)| ((u - v) / h).powi(2))
                .sum::<f64>()
                .sqrt();
            cp.kind == CriticalKind::Saddle && near <= 3.0 * (grid.dim as f64).sqrt()
        });
    match refined {
        Some(cp) => {
            if cp.min_abs_eigenvalue() < opts.morse_tol {
                return Err(LandscapeError::MorseViolation {
                    location: cp.location.clone(),
                    eigenvalue: cp.min_abs_eigenvalue(),
                });
            }
            Ok(SaddleSearch {
                height: cp.value,
                saddle: cp,
                refined: true,
            })
        }
        None => {
            log::warn!("saddle refinement failed near {x:?}; keeping grid bottleneck");
            Ok(SaddleSearch {
                height: grid_height,
                saddle: CriticalPoint::at(p, &x),
                refined: false,
            })
        }
    }
}
