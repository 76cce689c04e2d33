use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::banded::BandCholesky;
use super::{DiscreteForm, FormKind, SpectralError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    Dense,
    SubspaceIteration,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenOptions {
    /// Dense solve below this many active nodes.
    pub dense_limit: usize,
    pub block: usize,
    /// Stop when the lowest Ritz value moves by less than this, relatively.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            dense_limit: 2000,
            block: 4,
            tol: 1e-10,
            max_iter: 500,
        }
    }
}

/// Smallest nonzero eigenvalue of `A f = lambda M f`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GapReport {
    pub kind: FormKind,
    pub lambda1: f64,
    pub method: SolverMethod,
    pub unknowns: usize,
    pub iterations: usize,
    /// `|B v - lambda v|` for the unit eigenvector `v` of the symmetrized problem.
    pub residual: f64,
    /// Eigenfunction on the full grid, zero on inactive nodes, with
    /// mass-mean 0 and mass-second-moment 1.
    #[serde(skip)]
    pub eigenfunction: Vec<f64>,
}

/// `B = M^{-1/2} A M^{-1/2}` restricted to active nodes, stored as entries.
struct Symmetrized {
    /// Active node ids in grid order.
    nodes: Vec<usize>,
    sqrt_m: Vec<f64>,
    diag: Vec<f64>,
    /// `(p, q, b)` with `p > q`, `b = -c / sqrt(m_p m_q)`.
    off: Vec<(usize, usize, f64)>,
    u0: Vec<f64>,
}

impl Symmetrized {
    fn new(form: &DiscreteForm) -> Self {
        let nodes: Vec<usize> = (0..form.len()).filter(|i| form.active[*i]).collect();
        let mut pos = vec![usize::MAX; form.len()];
        for (p, i) in nodes.iter().enumerate() {
            pos[*i] = p;
        }
        let sqrt_m: Vec<f64> = nodes.iter().map(|i| form.mass[*i].sqrt()).collect();
        let mut diag = vec![0.0; nodes.len()];
        let mut off = Vec::with_capacity(form.edges.len());
        for e in &form.edges {
            let (p, q) = (pos[e.i], pos[e.j]);
            diag[p] += e.c / form.mass[e.i];
            diag[q] += e.c / form.mass[e.j];
            let b = -e.c / (sqrt_m[p] * sqrt_m[q]);
            off.push((p.max(q), p.min(q), b));
        }
        let norm = sqrt_m.iter().map(|v| v * v).sum::<f64>().sqrt();
        let u0 = sqrt_m.iter().map(|v| v / norm).collect();
        Self {
            nodes,
            sqrt_m,
            diag,
            off,
            u0,
        }
    }

    fn len(&self) -> usize {
        self.nodes.len()
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        for (o, (d, x)) in out.iter_mut().zip(self.diag.iter().zip(v)) {
            *o = d * x;
        }
        for &(p, q, b) in &self.off {
            out[p] += b * v[q];
            out[q] += b * v[p];
        }
    }

    fn deflate(&self, v: &mut [f64]) {
        let d = dot(&self.u0, v);
        for (x, u) in v.iter_mut().zip(&self.u0) {
            *x -= d * u;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn spectral_gap(form: &DiscreteForm) -> Result<GapReport, SpectralError> {
    spectral_gap_with(form, &EigenOptions::default())
}

pub fn spectral_gap_with(form: &DiscreteForm, opts: &EigenOptions) -> Result<GapReport, SpectralError> {
    let s = Symmetrized::new(form);
    if s.len() < 2 {
        return Err(SpectralError::InvalidGrid(format!(
            "{} active nodes, need at least 2",
            s.len()
        )));
    }
    let (v, iterations, method) = if s.len() < opts.dense_limit {
        (dense_lowest(&s), 0, SolverMethod::Dense)
    } else {
        let (v, it) = subspace_lowest(&s, opts)?;
        (v, it, SolverMethod::SubspaceIteration)
    };
    finish(form, &s, v, iterations, method)
}

fn finish(
    form: &DiscreteForm,
    s: &Symmetrized,
    mut v: Vec<f64>,
    iterations: usize,
    method: SolverMethod,
) -> Result<GapReport, SpectralError> {
    s.deflate(&mut v);
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut bv = vec![0.0; v.len()];
    s.apply(&v, &mut bv);
    let theta = dot(&v, &bv);
    let residual = bv
        .iter()
        .zip(&v)
        .map(|(b, x)| (b - theta * x).powi(2))
        .sum::<f64>()
        .sqrt();

    let mut f = vec![0.0; form.len()];
    for (p, i) in s.nodes.iter().enumerate() {
        f[*i] = v[p] / s.sqrt_m[p];
    }
    let mean = form.mean(&f);
    for i in &s.nodes {
        f[*i] -= mean;
    }
    let second: f64 = s.nodes.iter().map(|i| form.mass[*i] * f[*i] * f[*i]).sum();
    let scale = second.sqrt();
    for i in &s.nodes {
        f[*i] /= scale;
    }
    // The edge sum has no cancellation, unlike v^T B v.
    let lambda1 = form.dirichlet_energy(&f) / form.variance(&f);
    Ok(GapReport {
        kind: form.kind,
        lambda1,
        method,
        unknowns: s.len(),
        iterations,
        residual,
        eigenfunction: f,
    })
}

fn dense_lowest(s: &Symmetrized) -> Vec<f64> {
    let n = s.len();
    let mut b = DMatrix::<f64>::zeros(n, n);
    for (p, d) in s.diag.iter().enumerate() {
        b[(p, p)] = *d;
    }
    for &(p, q, v) in &s.off {
        b[(p, q)] += v;
        b[(q, p)] += v;
    }
    // Lift the null vector above the spectrum.
    let shift = 2.0 * s.diag.iter().fold(0.0_f64, |m, v| m.max(*v)) + 1.0;
    for p in 0..n {
        for q in 0..n {
            b[(p, q)] += shift * s.u0[p] * s.u0[q];
        }
    }
    let eig = SymmetricEigen::new(b);
    let k = (0..n)
        .min_by(|a, c| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*c]))
        .unwrap();
    eig.eigenvectors.column(k).iter().copied().collect()
}

/// Inverse subspace iteration with Rayleigh-Ritz.
///
/// The singular `B` is grounded at the heaviest node: that row and column are
/// replaced by the identity, and solutions are projected back onto the
/// complement of the null vector, which reproduces `B^+` on that subspace.
fn subspace_lowest(s: &Symmetrized, opts: &EigenOptions) -> Result<(Vec<f64>, usize), SpectralError> {
    let n = s.len();
    let anchor = (0..n)
        .max_by(|a, b| s.sqrt_m[*a].total_cmp(&s.sqrt_m[*b]))
        .unwrap();
    let bw = s.off.iter().map(|(p, q, _)| p - q).max().unwrap_or(0);

    // Band of the grounded matrix, row-major lower part.
    let w = bw + 1;
    let mut band = vec![0.0; n * w];
    for (p, d) in s.diag.iter().enumerate() {
        band[p * w + bw] = if p == anchor { 1.0 } else { *d };
    }
    for &(p, q, v) in &s.off {
        if p != anchor && q != anchor {
            band[p * w + bw - (p - q)] += v;
        }
    }
    let chol = BandCholesky::factor(n, bw, |i, j| band[i * w + bw - (i - j)]).ok_or(
        SpectralError::NoConvergence {
            iterations: 0,
            residual: f64::NAN,
        },
    )?;
    let solve = |r: &mut Vec<f64>| {
        r[anchor] = 0.0;
        chol.solve_in_place(r);
        s.deflate(r);
    };

    let k = opts.block.max(1).min(n - 1);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    let mut basis: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            (0..n)
                .map(|p| {
                    let base = if j == 0 { p as f64 / n as f64 } else { 0.0 };
                    s.sqrt_m[p] * (base + 0.1 * rng.random_range(-1.0..1.0))
                })
                .collect()
        })
        .collect();
    orthonormalize(s, &mut basis);

    let mut prev = f64::INFINITY;
    let mut tmp = vec![0.0; n];
    for it in 1..=opts.max_iter {
        for v in basis.iter_mut() {
            solve(v);
        }
        orthonormalize(s, &mut basis);
        // Rayleigh-Ritz on span(basis).
        let bq: Vec<Vec<f64>> = basis
            .iter()
            .map(|v| {
                s.apply(v, &mut tmp);
                tmp.clone()
            })
            .collect();
        let g = DMatrix::from_fn(k, k, |a, b| 0.5 * (dot(&basis[a], &bq[b]) + dot(&basis[b], &bq[a])));
        let eig = SymmetricEigen::new(g);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));
        let rotated: Vec<Vec<f64>> = order
            .iter()
            .map(|&c| {
                let mut v = vec![0.0; n];
                for (a, q) in basis.iter().enumerate() {
                    let coef = eig.eigenvectors[(a, c)];
                    for (x, y) in v.iter_mut().zip(q) {
                        *x += coef * y;
                    }
                }
                v
            })
            .collect();
        basis = rotated;
        let theta = eig.eigenvalues[order[0]];
        if (theta - prev).abs() <= opts.tol * theta.abs() {
            return Ok((basis.swap_remove(0), it));
        }
        prev = theta;
    }
    let v = &basis[0];
    s.apply(v, &mut tmp);
    let theta = dot(v, &tmp);
    let residual = tmp
        .iter()
        .zip(v)
        .map(|(b, x)| (b - theta * x).powi(2))
        .sum::<f64>()
        .sqrt();
    Err(SpectralError::NoConvergence {
        iterations: opts.max_iter,
        residual,
    })
}

/// Modified Gram-Schmidt, twice, against the null vector and each other.
fn orthonormalize(s: &Symmetrized, basis: &mut [Vec<f64>]) {
    for _ in 0..2 {
        for a in 0..basis.len() {
            s.deflate(&mut basis[a]);
            for b in 0..a {
                let (head, tail) = basis.split_at_mut(a);
                let d = dot(&head[b], &tail[0]);
                for (x, y) in tail[0].iter_mut().zip(&head[b]) {
                    *x -= d * y;
                }
            }
            let nv = norm(&basis[a]);
            if nv > 0.0 {
                basis[a].iter_mut().for_each(|x| *x /= nv);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::TemperaturePair;
    use crate::landscape::{corpus_potential, DomainBox, GrowthDeclaration, Polynomial};
    use crate::spectral::{assemble_isa_form, assemble_langevin_form, Edge, Grid};

    #[test]
    fn two_node_closed_form() {
        let g = Grid::uniform(&[0.0], &[1.0], &[2]).unwrap();
        let (w, m1, m2) = (0.7, 0.3, 0.7);
        let f = DiscreteForm::from_parts(FormKind::Custom, g, vec![Edge { i: 0, j: 1, c: w }], vec![m1, m2]).unwrap();
        let r = spectral_gap(&f).unwrap();
        let want = w * (1.0 / m1 + 1.0 / m2);
        assert!((r.lambda1 - want).abs() < 1e-12 * want);
    }

    #[test]
    fn neumann_laplacian_closed_form() {
        for n in [17, 64] {
            let p = Polynomial::univariate(&[0.0], DomainBox::cube(1, -1.0, 1.0), GrowthDeclaration::default()).unwrap();
            let g = Grid::uniform(&[-1.0], &[1.0], &[n]).unwrap();
            let f = assemble_langevin_form(&p, 0.4, &g).unwrap();
            let h = g.spacing(0);
            let theta = std::f64::consts::PI / (n - 1) as f64;
            let want = 4.0 * 0.4 / (h * h) * (0.5 * theta).sin().powi(2);
            let r = spectral_gap(&f).unwrap();
            assert!((r.lambda1 / want - 1.0).abs() < 1e-10, "{} vs {want}", r.lambda1);
        }
    }

    #[test]
    fn dense_and_subspace_agree() {
        let p = corpus_potential("tilted_double_well").unwrap();
        let g = Grid::uniform(&[-2.0], &[2.0], &[600]).unwrap();
        let f = assemble_langevin_form(p.as_ref(), 0.2, &g).unwrap();
        let d = spectral_gap(&f).unwrap();
        let it = spectral_gap_with(&f, &EigenOptions { dense_limit: 0, ..Default::default() }).unwrap();
        assert_eq!(d.method, SolverMethod::Dense);
        assert_eq!(it.method, SolverMethod::SubspaceIteration);
        assert!((d.lambda1 / it.lambda1 - 1.0).abs() < 1e-8, "{} vs {}", d.lambda1, it.lambda1);
    }

    #[test]
    fn subspace_on_isa_matches_dense() {
        let p = corpus_potential("tilted_double_well").unwrap();
        let axis = Grid::uniform(&[-2.0], &[2.0], &[40]).unwrap();
        let g = axis.product(&axis);
        let f = assemble_isa_form(p.as_ref(), &TemperaturePair::new(0.15, 0.45).unwrap(), &g).unwrap();
        let d = spectral_gap(&f).unwrap();
        let it = spectral_gap_with(&f, &EigenOptions { dense_limit: 0, ..Default::default() }).unwrap();
        assert!((d.lambda1 / it.lambda1 - 1.0).abs() < 1e-8, "{} vs {}", d.lambda1, it.lambda1);
        assert!(it.residual < 1e-6 * d.lambda1.max(1.0));
    }

    #[test]
    fn eigenfunction_is_normalized_and_reproducible() {
        let p = corpus_potential("tilted_double_well").unwrap();
        let g = Grid::uniform(&[-2.0], &[2.0], &[300]).unwrap();
        let f = assemble_langevin_form(p.as_ref(), 0.2, &g).unwrap();
        let a = spectral_gap(&f).unwrap();
        let b = spectral_gap(&f).unwrap();
        assert_eq!(a.lambda1, b.lambda1);
        assert!(f.mean(&a.eigenfunction).abs() < 1e-10);
        assert!((f.variance(&a.eigenfunction) - 1.0).abs() < 1e-10);
    }
}
