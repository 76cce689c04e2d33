use std::collections::VecDeque;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::{Grid, SpectralError};
use crate::gibbs::{grid_energies, log_add_exp, log_mu_from_energies, weights_from_energies, TemperaturePair};
use crate::landscape::Potential;

/// Default cap on grid nodes for form assembly.
pub const DEFAULT_MAX_NODES: usize = 250_000;

/// Nodes whose log-mass is this far below the largest are dropped.
pub const LOG_MASS_FLOOR: f64 = 600.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormKind {
    Langevin,
    Isa,
    /// The isa form restricted to functions of `x1` alone: mass
    /// `(nu^tau1 + nu^tau2)/2`, coefficient density `(tau1 nu^tau1 + tau2 nu^tau2)/2`.
    IsaMarginal,
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub c: f64,
}

/// Discretized Dirichlet form `f^T A f = sum_edges c (f_i - f_j)^2` with a
/// diagonal mass matrix.
///
/// `A` is held as its edge list, so it is symmetric, annihilates constants
/// and is nonnegative by construction. Nodes outside `active` carry no mass
/// and no edges. `outside_mass` is probability mass that lives off the grid,
/// where test functions are taken to vanish.
#[derive(Clone, Debug)]
pub struct DiscreteForm {
    pub kind: FormKind,
    pub grid: Grid,
    pub edges: Vec<Edge>,
    pub mass: Vec<f64>,
    pub active: Vec<bool>,
    pub outside_mass: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FormOptions {
    pub max_nodes: usize,
}

impl Default for FormOptions {
    fn default() -> Self {
        Self {
            max_nodes: DEFAULT_MAX_NODES,
        }
    }
}

impl DiscreteForm {
    /// Form from explicit parts; nodes with zero mass are inactive.
    pub fn from_parts(
        kind: FormKind,
        grid: Grid,
        edges: Vec<Edge>,
        mass: Vec<f64>,
    ) -> Result<Self, SpectralError> {
        if mass.len() != grid.len() {
            return Err(SpectralError::DimensionMismatch(format!(
                "{} masses for {} nodes",
                mass.len(),
                grid.len()
            )));
        }
        for e in &edges {
            if e.i >= mass.len() || e.j >= mass.len() || e.i == e.j || !(e.c >= 0.0) {
                return Err(SpectralError::InvalidGrid(format!("bad edge {e:?}")));
            }
        }
        let active = mass.iter().map(|m| *m > 0.0).collect();
        Ok(Self {
            kind,
            grid,
            edges,
            mass,
            active,
            outside_mass: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum::<f64>() + self.outside_mass
    }

    /// `sum_edges c (f_i - f_j)^2`.
    pub fn dirichlet_energy(&self, f: &[f64]) -> f64 {
        self.edges
            .iter()
            .map(|e| {
                let d = f[e.i] - f[e.j];
                e.c * d * d
            })
            .sum()
    }

    pub fn mean(&self, f: &[f64]) -> f64 {
        let s: f64 = self.mass.iter().zip(f).map(|(m, v)| m * v).sum();
        s / self.total_mass()
    }

    /// Two-pass variance; off-grid mass contributes `f = 0`.
    pub fn variance(&self, f: &[f64]) -> f64 {
        let mean = self.mean(f);
        let s: f64 = self
            .mass
            .iter()
            .zip(f)
            .map(|(m, v)| m * (v - mean) * (v - mean))
            .sum();
        (s + self.outside_mass * mean * mean) / self.total_mass()
    }

    /// `out = A f`.
    pub fn apply(&self, f: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for e in &self.edges {
            let flux = e.c * (f[e.i] - f[e.j]);
            out[e.i] += flux;
            out[e.j] -= flux;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.len()];
        for e in &self.edges {
            d[e.i] += e.c;
            d[e.j] += e.c;
        }
        d
    }

    /// `max |A 1| / max diag(A)`.
    pub fn constant_residual(&self) -> f64 {
        let ones = vec![1.0; self.len()];
        let mut out = vec![0.0; self.len()];
        self.apply(&ones, &mut out);
        let scale = self.diagonal().iter().fold(0.0_f64, |m, v| m.max(*v));
        let r = out.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            r
        } else {
            r / scale
        }
    }

    /// `A` as `row col value` lines, diagonal included, sorted by row then column.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> io::Result<()> {
        let diag = self.diagonal();
        let mut t: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * self.edges.len() + self.len());
        for e in &self.edges {
            t.push((e.i, e.j, -e.c));
            t.push((e.j, e.i, -e.c));
        }
        for (i, d) in diag.iter().enumerate() {
            if self.active[i] {
                t.push((i, i, *d));
            }
        }
        t.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        for (i, j, v) in t {
            writeln!(w, "{i} {j} {v:.17e}")?;
        }
        Ok(())
    }

    /// Node masses as `index mass` lines.
    pub fn write_mass<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (i, m) in self.mass.iter().enumerate() {
            writeln!(w, "{i} {m:.17e}")?;
        }
        Ok(())
    }
}

/// Assemble a form from normalized log-densities and per-node, per-axis
/// diffusion coefficients.
fn assemble(
    kind: FormKind,
    grid: &Grid,
    log_density: &[f64],
    coef: impl Fn(usize, usize) -> f64,
    outside_mass: f64,
) -> DiscreteForm {
    let len = grid.len();
    let log_mass: Vec<f64> = (0..len)
        .map(|i| log_density[i] + grid.cell_volume(i).ln())
        .collect();
    let top = log_mass.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut active: Vec<bool> = log_mass.iter().map(|l| *l >= top - LOG_MASS_FLOOR).collect();

    let mut edges = Vec::new();
    for i in 0..len {
        if !active[i] {
            continue;
        }
        for k in 0..grid.dim() {
            let ik = grid.axis_index(i, k);
            if ik + 1 >= grid.axis(k).len() {
                continue;
            }
            let j = i + grid.stride(k);
            if !active[j] {
                continue;
            }
            let h = grid.spacing(k);
            let face = grid.cell_volume(i) / grid.cell_width(k, ik);
            let wi = coef(i, k) * log_density[i].exp();
            let wj = coef(j, k) * log_density[j].exp();
            edges.push(Edge {
                i,
                j,
                c: 0.5 * (wi + wj) * face / h,
            });
        }
    }

    // Keep only the component of the heaviest node.
    let anchor = (0..len)
        .max_by(|a, b| log_mass[*a].total_cmp(&log_mass[*b]))
        .unwrap_or(0);
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); len];
    for e in &edges {
        adj[e.i].push(e.j);
        adj[e.j].push(e.i);
    }
    let mut seen = vec![false; len];
    let mut queue = VecDeque::from([anchor]);
    seen[anchor] = true;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    let dropped = active.iter().zip(&seen).filter(|(a, s)| **a && !**s).count();
    if dropped > 0 {
        log::warn!("{dropped} active nodes are disconnected from the bulk and were dropped");
        for i in 0..len {
            active[i] &= seen[i];
        }
        edges.retain(|e| active[e.i] && active[e.j]);
    }

    let mass = (0..len)
        .map(|i| if active[i] { log_mass[i].exp() } else { 0.0 })
        .collect();
    DiscreteForm {
        kind,
        grid: grid.clone(),
        edges,
        mass,
        active,
        outside_mass,
    }
}

fn check_size(grid: &Grid, opts: &FormOptions) -> Result<(), SpectralError> {
    if grid.len() > opts.max_nodes {
        return Err(SpectralError::GridTooLarge {
            nodes: grid.len(),
            cap: opts.max_nodes,
        });
    }
    Ok(())
}

/// Normalize unnormalized log-densities so `sum exp(l) vol = 1`.
fn normalize(grid: &Grid, log_w: &mut [f64]) -> Result<(), SpectralError> {
    let mut z = f64::NEG_INFINITY;
    for (i, l) in log_w.iter().enumerate() {
        z = log_add_exp(z, l + grid.cell_volume(i).ln());
    }
    if !z.is_finite() {
        return Err(crate::gibbs::GibbsError::Underflow.into());
    }
    log_w.iter_mut().for_each(|l| *l -= z);
    Ok(())
}

pub fn assemble_langevin_form(
    p: &dyn Potential,
    tau: f64,
    grid: &Grid,
) -> Result<DiscreteForm, SpectralError> {
    assemble_langevin_form_with(p, tau, grid, &FormOptions::default())
}

pub fn assemble_langevin_form_with(
    p: &dyn Potential,
    tau: f64,
    grid: &Grid,
    opts: &FormOptions,
) -> Result<DiscreteForm, SpectralError> {
    check_size(grid, opts)?;
    if !(tau > 0.0) {
        return Err(SpectralError::InvalidArgument(format!("tau = {tau}")));
    }
    let h = grid_energies(p, grid)?;
    let mut log_d: Vec<f64> = h.iter().map(|e| -e / tau).collect();
    normalize(grid, &mut log_d)?;
    Ok(assemble(FormKind::Langevin, grid, &log_d, |_, _| tau, 0.0))
}

/// The isa form on a `2n`-dimensional grid: axes `0..n` carry `x1`, axes
/// `n..2n` carry `x2`.
pub fn assemble_isa_form(
    p: &dyn Potential,
    t: &TemperaturePair,
    grid: &Grid,
) -> Result<DiscreteForm, SpectralError> {
    assemble_isa_form_with(p, t, grid, &FormOptions::default())
}

pub fn assemble_isa_form_with(
    p: &dyn Potential,
    t: &TemperaturePair,
    grid: &Grid,
    opts: &FormOptions,
) -> Result<DiscreteForm, SpectralError> {
    check_size(grid, opts)?;
    let n = p.dim();
    if grid.dim() != 2 * n {
        return Err(SpectralError::DimensionMismatch(format!(
            "isa grid needs {} axes, got {}",
            2 * n,
            grid.dim()
        )));
    }
    let g1 = grid.sub_grid(0..n);
    let g2 = grid.sub_grid(n..2 * n);
    let h1 = grid_energies(p, &g1)?;
    let h2 = grid_energies(p, &g2)?;
    let len1 = g1.len();
    let mut log_d = Vec::with_capacity(grid.len());
    let mut a = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let (e1, e2) = (h1[i % len1], h2[i / len1]);
        log_d.push(log_mu_from_energies(t, e1, e2));
        let w = weights_from_energies(t, e1, e2);
        a.push((w.a1, w.a2));
    }
    normalize(grid, &mut log_d)?;
    Ok(assemble(
        FormKind::Isa,
        grid,
        &log_d,
        |i, k| if k < n { a[i].0 } else { a[i].1 },
        0.0,
    ))
}

/// Marginal isa form normalized on the grid itself.
pub fn assemble_marginal_form(
    p: &dyn Potential,
    t: &TemperaturePair,
    grid: &Grid,
) -> Result<DiscreteForm, SpectralError> {
    check_size(grid, &FormOptions::default())?;
    let h = grid_energies(p, grid)?;
    let mut l1: Vec<f64> = h.iter().map(|e| -e / t.tau1).collect();
    let mut l2: Vec<f64> = h.iter().map(|e| -e / t.tau2).collect();
    normalize(grid, &mut l1)?;
    normalize(grid, &mut l2)?;
    Ok(marginal_from_logs(grid, t, &l1, &l2, 0.0))
}

/// Marginal form on a grid that covers only part of the space. `log_z1` and
/// `log_z2` are the global log partition sums of `exp(-H/tau_k)`.
pub(crate) fn assemble_marginal_form_partial(
    p: &dyn Potential,
    t: &TemperaturePair,
    grid: &Grid,
    log_z1: f64,
    log_z2: f64,
    opts: &FormOptions,
) -> Result<DiscreteForm, SpectralError> {
    check_size(grid, opts)?;
    let h = grid_energies(p, grid)?;
    let l1: Vec<f64> = h.iter().map(|e| -e / t.tau1 - log_z1).collect();
    let l2: Vec<f64> = h.iter().map(|e| -e / t.tau2 - log_z2).collect();
    let mut form = marginal_from_logs(grid, t, &l1, &l2, 0.0);
    form.outside_mass = (1.0 - form.mass.iter().sum::<f64>()).max(0.0);
    Ok(form)
}

fn marginal_from_logs(
    grid: &Grid,
    t: &TemperaturePair,
    l1: &[f64],
    l2: &[f64],
    outside: f64,
) -> DiscreteForm {
    let log_d: Vec<f64> = l1
        .iter()
        .zip(l2)
        .map(|(a, b)| log_add_exp(*a, *b) - std::f64::consts::LN_2)
        .collect();
    // Effective coefficient tau1 r + tau2 (1 - r) with r = nu1 / (nu1 + nu2).
    let coef: Vec<f64> = l1
        .iter()
        .zip(l2)
        .map(|(a, b)| {
            let r = 1.0 / (1.0 + (b - a).exp());
            t.tau1 * r + t.tau2 * (1.0 - r)
        })
        .collect();
    assemble(FormKind::IsaMarginal, grid, &log_d, |i, _| coef[i], outside)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::{corpus_potential, DomainBox, GrowthDeclaration, Polynomial};
    use rand::{Rng, SeedableRng};

    fn flat(dim: usize) -> Polynomial {
        Polynomial::univariate(&[0.0], DomainBox::cube(dim, -1.0, 1.0), GrowthDeclaration::default()).unwrap()
    }

    #[test]
    fn flat_equal_temperature_isa_is_scaled_laplacian() {
        let p = flat(1);
        let axis = Grid::uniform(&[-1.0], &[1.0], &[9]).unwrap();
        let g = axis.product(&axis);
        let f = assemble_isa_form(&p, &TemperaturePair::equal(0.3), &g).unwrap();
        // Uniform density 1/4 on [-1,1]^2: interior conductance tau * (1/4) * h / h.
        let i = g.index(&[3, 4]);
        let e = f.edges.iter().find(|e| e.i == i && e.j == i + 1).unwrap();
        assert!((e.c - 0.3 * 0.25).abs() < 1e-14);
        assert_eq!(f.edges.len(), 2 * 8 * 9);
        assert!(f.constant_residual() < 1e-12);
    }

    #[test]
    fn form_is_nonnegative_and_kills_constants() {
        let p = corpus_potential("tilted_double_well").unwrap();
        let axis = Grid::uniform(&[-2.0], &[2.0], &[41]).unwrap();
        let g = axis.product(&axis);
        let f = assemble_isa_form(p.as_ref(), &TemperaturePair::new(0.1, 0.3).unwrap(), &g).unwrap();
        assert!(f.constant_residual() < 1e-12);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let v: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            assert!(f.dirichlet_energy(&v) >= 0.0);
        }
        assert!((f.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linear_function_energy_matches_quadrature() {
        let p = corpus_potential("tilted_double_well").unwrap();
        let t = TemperaturePair::new(0.2, 0.6).unwrap();
        let axis = Grid::uniform(&[-2.0], &[2.0], &[161]).unwrap();
        let g = axis.product(&axis);
        let f = assemble_isa_form(p.as_ref(), &t, &g).unwrap();
        let x1: Vec<f64> = (0..g.len()).map(|i| axis.axis(0)[i % 161]).collect();
        let energy = f.dirichlet_energy(&x1);
        // Quadrature of E_mu a1 with the same node masses.
        let mut want = 0.0;
        for i in 0..g.len() {
            let w = weights_from_energies(&t, p.energy(&[x1[i]]), p.energy(&[axis.axis(0)[i / 161]]));
            want += f.mass[i] * w.a1;
        }
        assert!((energy / want - 1.0).abs() < 5e-3, "{energy} vs {want}");
    }

    #[test]
    fn swapping_blocks_maps_the_form_to_itself() {
        let p = corpus_potential("tilted_double_well").unwrap();
        let axis = Grid::uniform(&[-2.0], &[2.0], &[21]).unwrap();
        let g = axis.product(&axis);
        let f = assemble_isa_form(p.as_ref(), &TemperaturePair::new(0.1, 0.3).unwrap(), &g).unwrap();
        let swap = |i: usize| (i % 21) * 21 + i / 21;
        let mut table = std::collections::HashMap::new();
        for e in &f.edges {
            table.insert((e.i.min(e.j), e.i.max(e.j)), e.c);
        }
        for e in &f.edges {
            let (a, b) = (swap(e.i), swap(e.j));
            let c = table[&(a.min(b), a.max(b))];
            assert!((c - e.c).abs() <= 1e-14 * c.abs().max(1e-300));
        }
        for i in 0..g.len() {
            assert!((f.mass[i] - f.mass[swap(i)]).abs() <= 1e-15 * f.mass[i].max(1e-300));
        }
    }

    #[test]
    fn oversized_grid_is_rejected() {
        let p = flat(1);
        let axis = Grid::uniform(&[-1.0], &[1.0], &[100]).unwrap();
        let g = axis.product(&axis);
        let opts = FormOptions { max_nodes: 5000 };
        assert!(matches!(
            assemble_isa_form_with(&p, &TemperaturePair::equal(1.0), &g, &opts),
            Err(SpectralError::GridTooLarge { .. })
        ));
    }

    #[test]
    fn deep_tails_become_inactive() {
        let p = corpus_potential("double_well").unwrap();
        let g = Grid::uniform(&[-2.0], &[2.0], &[401]).unwrap();
        let f = assemble_langevin_form(p.as_ref(), 0.01, &g).unwrap();
        assert!(f.active_count() < 401);
        assert!(f.active[200] && !f.active[0]);
        assert!(f.edges.iter().all(|e| f.active[e.i] && f.active[e.j]));
    }

    #[test]
    fn marginal_equals_isa_on_functions_of_x1() {
        let p = corpus_potential("tilted_double_well").unwrap();
        let t = TemperaturePair::new(0.15, 0.45).unwrap();
        let axis = Grid::uniform(&[-2.0], &[2.0], &[81]).unwrap();
        let g = axis.product(&axis);
        let iso = assemble_isa_form(p.as_ref(), &t, &g).unwrap();
        let marg = assemble_marginal_form(p.as_ref(), &t, &axis).unwrap();
        let h: Vec<f64> = axis.axis(0).iter().map(|x| (2.0 * x).sin() + x * x).collect();
        let lifted: Vec<f64> = (0..g.len()).map(|i| h[i % 81]).collect();
        let (e1, e2) = (iso.dirichlet_energy(&lifted), marg.dirichlet_energy(&h));
        assert!((e1 / e2 - 1.0).abs() < 1e-9, "{e1} vs {e2}");
        assert!((iso.variance(&lifted) / marg.variance(&h) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn triplets_round_trip_row_sums() {
        let p = corpus_potential("double_well").unwrap();
        let g = Grid::uniform(&[-2.0], &[2.0], &[6]).unwrap();
        let f = assemble_langevin_form(p.as_ref(), 0.5, &g).unwrap();
        let mut buf = Vec::new();
        f.write_triplets(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut sums = vec![0.0; 6];
        for line in text.lines() {
            let mut it = line.split_whitespace();
            let i: usize = it.next().unwrap().parse().unwrap();
            let _j: usize = it.next().unwrap().parse().unwrap();
            let v: f64 = it.next().unwrap().parse().unwrap();
            sums[i] += v;
        }
        let d = f.diagonal();
        for (s, dd) in sums.iter().zip(d) {
            assert!(s.abs() <= 1e-12 * dd);
        }
        let mut m = Vec::new();
        f.write_mass(&mut m).unwrap();
        assert_eq!(String::from_utf8(m).unwrap().lines().count(), 6);
    }
}
