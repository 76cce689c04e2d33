//! Energy landscapes `H: R^n -> R` with analytic derivatives.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::LandscapeError;

/// Axis-aligned box used to bound numerical searches and grids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl DomainBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, LandscapeError> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(LandscapeError::InvalidPotential(format!(
                "domain box bounds have lengths {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        for (a, b) in lo.iter().zip(&hi) {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(LandscapeError::InvalidPotential(format!(
                    "domain box axis [{a}, {b}] is not a finite nonempty interval"
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    /// The same interval `[lo, hi]` on each of `dim` axes.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        Self {
            lo: vec![lo; dim],
            hi: vec![hi; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn diameter(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }

    /// Largest coordinate magnitude reachable inside the box.
    pub fn radius_inf(&self) -> f64 {
        self.lo
            .iter()
            .chain(&self.hi)
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *v >= *a && *v <= *b)
    }
}

/// User-declared growth conditions at infinity.
///
/// These are asymptotic statements about `|x| -> inf` and cannot be checked on
/// a bounded box; corpus entries carry declarations verified by hand.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrowthDeclaration {
    /// `liminf |grad H| > 0` and `liminf (|grad H|^2 - lap H) > -inf`.
    pub poincare: bool,
    /// `(|grad H|^2 - lap H) / |x|^2` bounded below and Hessian bounded below.
    pub log_sobolev: bool,
}

impl GrowthDeclaration {
    pub const BOTH: Self = Self {
        poincare: true,
        log_sobolev: true,
    };
}

/// A smooth energy landscape with gradient and Hessian.
///
/// Hessians are written row-major into an `n * n` buffer.
pub trait Potential: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn energy(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], grad: &mut [f64]);
    fn hessian(&self, x: &[f64], hess: &mut [f64]);
    fn domain(&self) -> &DomainBox;

    fn growth(&self) -> GrowthDeclaration {
        GrowthDeclaration::default()
    }

    fn gradient_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.gradient(x, &mut g);
        g
    }

    fn hessian_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut h = vec![0.0; n * n];
        self.hessian(x, &mut h);
        h
    }
}

pub type SharedPotential = Arc<dyn Potential>;

/// `c * prod_k x_k^{p_k}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    pub powers: Vec<u32>,
}

/// Multivariate polynomial given as a sum of monomials.
#[derive(Clone, Debug)]
pub struct Polynomial {
    terms: Vec<Monomial>,
    domain: DomainBox,
    growth: GrowthDeclaration,
}

impl Polynomial {
    pub fn new(
        terms: Vec<Monomial>,
        domain: DomainBox,
        growth: GrowthDeclaration,
    ) -> Result<Self, LandscapeError> {
        let n = domain.dim();
        if let Some(t) = terms.iter().find(|t| t.powers.len() != n) {
            return Err(LandscapeError::InvalidPotential(format!(
                "monomial with {} exponents in a {n}-dimensional polynomial",
                t.powers.len()
            )));
        }
        if terms.iter().any(|t| !t.coef.is_finite()) {
            return Err(LandscapeError::InvalidPotential(
                "non-finite polynomial coefficient".into(),
            ));
        }
        Ok(Self {
            terms,
            domain,
            growth,
        })
    }

    /// 1D polynomial from ascending coefficients `c_0 + c_1 x + ...`.
    pub fn univariate(
        coefficients: &[f64],
        domain: DomainBox,
        growth: GrowthDeclaration,
    ) -> Result<Self, LandscapeError> {
        let terms = coefficients
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(k, c)| Monomial {
                coef: *c,
                powers: vec![k as u32],
            })
            .collect();
        Self::new(terms, domain, growth)
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }
}

#[inline]
fn powi(x: f64, p: u32) -> f64 {
    match p {
        0 => 1.0,
        1 => x,
        2 => x * x,
        _ => x.powi(p as i32),
    }
}

/// `d^k/dx^k x^p` evaluated at `x`, for `k` in 0..=2.
#[inline]
fn dpow(x: f64, p: u32, k: u32) -> f64 {
    if k > p {
        return 0.0;
    }
    let falling = match k {
        0 => 1.0,
        1 => p as f64,
        _ => (p * (p - 1)) as f64,
    };
    falling * powi(x, p - k)
}

impl Potential for Polynomial {
    fn dim(&self) -> usize {
        self.domain.dim()
    }

    fn energy(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.coef
                    * t.powers
                        .iter()
                        .zip(x)
                        .map(|(p, v)| powi(*v, *p))
                        .product::<f64>()
            })
            .sum()
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for t in &self.terms {
            for (k, g) in grad.iter_mut().enumerate() {
                if t.powers[k] == 0 {
                    continue;
                }
                let mut v = t.coef;
                for (j, (p, xj)) in t.powers.iter().zip(x).enumerate() {
                    v *= if j == k { dpow(*xj, *p, 1) } else { powi(*xj, *p) };
                }
                *g += v;
            }
        }
    }

    fn hessian(&self, x: &[f64], hess: &mut [f64]) {
        let n = self.dim();
        hess.iter_mut().for_each(|h| *h = 0.0);
        for t in &self.terms {
            for a in 0..n {
                for b in a..n {
                    let mut v = t.coef;
                    for (j, (p, xj)) in t.powers.iter().zip(x).enumerate() {
                        let order = (j == a) as u32 + (j == b) as u32;
                        v *= dpow(*xj, *p, order);
                        if v == 0.0 {
                            break;
                        }
                    }
                    hess[a * n + b] += v;
                    if a != b {
                        hess[b * n + a] += v;
                    }
                }
            }
        }
    }

    fn domain(&self) -> &DomainBox {
        &self.domain
    }

    fn growth(&self) -> GrowthDeclaration {
        self.growth
    }
}

/// One Gaussian bump `w * exp(-|x - c|^2 / (2 s^2))`; negative weights make wells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianBump {
    pub weight: f64,
    pub center: Vec<f64>,
    pub width: f64,
}

/// Confining polynomial plus a sum of Gaussian bumps.
#[derive(Clone, Debug)]
pub struct GaussianMixture {
    confinement: Polynomial,
    bumps: Vec<GaussianBump>,
}

impl GaussianMixture {
    pub fn new(confinement: Polynomial, bumps: Vec<GaussianBump>) -> Result<Self, LandscapeError> {
        let n = confinement.dim();
        for b in &bumps {
            if b.center.len() != n || !(b.width > 0.0) || !b.weight.is_finite() {
                return Err(LandscapeError::InvalidPotential(format!(
                    "invalid Gaussian bump {b:?} for dimension {n}"
                )));
            }
        }
        Ok(Self { confinement, bumps })
    }
}

impl Potential for GaussianMixture {
    fn dim(&self) -> usize {
        self.confinement.dim()
    }

    fn energy(&self, x: &[f64]) -> f64 {
        let mut e = self.confinement.energy(x);
        for b in &self.bumps {
            let r2: f64 = x.iter().zip(&b.center).map(|(v, c)| (v - c) * (v - c)).sum();
            e += b.weight * (-r2 / (2.0 * b.width * b.width)).exp();
        }
        e
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        self.confinement.gradient(x, grad);
        for b in &self.bumps {
            let s2 = b.width * b.width;
            let r2: f64 = x.iter().zip(&b.center).map(|(v, c)| (v - c) * (v - c)).sum();
            let g = b.weight * (-r2 / (2.0 * s2)).exp();
            for (k, gk) in grad.iter_mut().enumerate() {
                *gk -= g * (x[k] - b.center[k]) / s2;
            }
        }
    }

    fn hessian(&self, x: &[f64], hess: &mut [f64]) {
        let n = self.dim();
        self.confinement.hessian(x, hess);
        for b in &self.bumps {
            let s2 = b.width * b.width;
            let r2: f64 = x.iter().zip(&b.center).map(|(v, c)| (v - c) * (v - c)).sum();
            let g = b.weight * (-r2 / (2.0 * s2)).exp();
            for i in 0..n {
                let di = x[i] - b.center[i];
                for j in 0..n {
                    let dj = x[j] - b.center[j];
                    let delta = if i == j { 1.0 } else { 0.0 };
                    hess[i * n + j] += g * (di * dj / (s2 * s2) - delta / s2);
                }
            }
        }
    }

    fn domain(&self) -> &DomainBox {
        self.confinement.domain()
    }

    fn growth(&self) -> GrowthDeclaration {
        self.confinement.growth()
    }
}

/// 1D piecewise polynomial. Piece `k` covers `[breaks[k-1], breaks[k])`, with
/// the first and last pieces extending to infinity. Each piece is given by
/// ascending coefficients in the global coordinate.
#[derive(Clone, Debug)]
pub struct PiecewisePolynomial {
    breaks: Vec<f64>,
    pieces: Vec<Vec<f64>>,
    domain: DomainBox,
    growth: GrowthDeclaration,
}

fn horner(c: &[f64], x: f64, order: u32) -> f64 {
    let mut acc = 0.0;
    for (k, ck) in c.iter().enumerate().rev() {
        let k = k as u32;
        if k < order {
            break;
        }
        acc = acc * x
            + ck * match order {
                0 => 1.0,
                1 => k as f64,
                _ => (k * (k - 1)) as f64,
            };
    }
    acc
}

impl PiecewisePolynomial {
    /// Pieces must join continuously up to the first derivative (relative
    /// tolerance `1e-9`), otherwise the gradient flow is ill-defined.
    pub fn new(
        breaks: Vec<f64>,
        pieces: Vec<Vec<f64>>,
        domain: DomainBox,
        growth: GrowthDeclaration,
    ) -> Result<Self, LandscapeError> {
        if domain.dim() != 1 || pieces.len() != breaks.len() + 1 {
            return Err(LandscapeError::InvalidPotential(format!(
                "piecewise polynomial needs a 1D box and breaks+1 pieces (got {} breaks, {} pieces)",
                breaks.len(),
                pieces.len()
            )));
        }
        if breaks.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(LandscapeError::InvalidPotential(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        for (k, b) in breaks.iter().enumerate() {
            for order in 0..2 {
                let l = horner(&pieces[k], *b, order);
                let r = horner(&pieces[k + 1], *b, order);
                if (l - r).abs() > 1e-9 * (1.0 + l.abs().max(r.abs())) {
                    return Err(LandscapeError::InvalidPotential(format!(
                        "pieces {k},{} disagree in derivative {order} at x={b}: {l} vs {r}",
                        k + 1
                    )));
                }
            }
        }
        Ok(Self {
            breaks,
            pieces,
            domain,
            growth,
        })
    }

    fn piece(&self, x: f64) -> &[f64] {
        let k = self.breaks.partition_point(|b| *b <= x);
        &self.pieces[k]
    }
}

impl Potential for PiecewisePolynomial {
    fn dim(&self) -> usize {
        1
    }

    fn energy(&self, x: &[f64]) -> f64 {
        horner(self.piece(x[0]), x[0], 0)
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        grad[0] = horner(self.piece(x[0]), x[0], 1);
    }

    fn hessian(&self, x: &[f64], hess: &mut [f64]) {
        hess[0] = horner(self.piece(x[0]), x[0], 2);
    }

    fn domain(&self) -> &DomainBox {
        &self.domain
    }

    fn growth(&self) -> GrowthDeclaration {
        self.growth
    }
}

/// `H(x) + offset`.
#[derive(Clone, Debug)]
pub struct Shifted {
    inner: SharedPotential,
    offset: f64,
}

impl Shifted {
    pub fn new(inner: SharedPotential, offset: f64) -> Self {
        Self { inner, offset }
    }
}

impl Potential for Shifted {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn energy(&self, x: &[f64]) -> f64 {
        self.inner.energy(x) + self.offset
    }
    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        self.inner.gradient(x, grad)
    }
    fn hessian(&self, x: &[f64], hess: &mut [f64]) {
        self.inner.hessian(x, hess)
    }
    fn domain(&self) -> &DomainBox {
        self.inner.domain()
    }
    fn growth(&self) -> GrowthDeclaration {
        self.inner.growth()
    }
}

/// `H(x - shift)` on the translated box.
#[derive(Clone, Debug)]
pub struct Translated {
    inner: SharedPotential,
    shift: Vec<f64>,
    domain: DomainBox,
}

impl Translated {
    pub fn new(inner: SharedPotential, shift: Vec<f64>) -> Self {
        let d = inner.domain();
        let domain = DomainBox {
            lo: d.lo.iter().zip(&shift).map(|(a, s)| a + s).collect(),
            hi: d.hi.iter().zip(&shift).map(|(a, s)| a + s).collect(),
        };
        Self {
            inner,
            shift,
            domain,
        }
    }

    fn pull_back(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.shift).map(|(v, s)| v - s).collect()
    }
}

impl Potential for Translated {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn energy(&self, x: &[f64]) -> f64 {
        self.inner.energy(&self.pull_back(x))
    }
    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        self.inner.gradient(&self.pull_back(x), grad)
    }
    fn hessian(&self, x: &[f64], hess: &mut [f64]) {
        self.inner.hessian(&self.pull_back(x), hess)
    }
    fn domain(&self) -> &DomainBox {
        &self.domain
    }
    fn growth(&self) -> GrowthDeclaration {
        self.inner.growth()
    }
}

/// `c * H(x)`.
#[derive(Clone, Debug)]
pub struct Scaled {
    inner: SharedPotential,
    factor: f64,
}

impl Scaled {
    pub fn new(inner: SharedPotential, factor: f64) -> Self {
        Self { inner, factor }
    }
}

impl Potential for Scaled {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn energy(&self, x: &[f64]) -> f64 {
        self.factor * self.inner.energy(x)
    }
    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        self.inner.gradient(x, grad);
        grad.iter_mut().for_each(|g| *g *= self.factor);
    }
    fn hessian(&self, x: &[f64], hess: &mut [f64]) {
        self.inner.hessian(x, hess);
        hess.iter_mut().for_each(|h| *h *= self.factor);
    }
    fn domain(&self) -> &DomainBox {
        self.inner.domain()
    }
    fn growth(&self) -> GrowthDeclaration {
        self.inner.growth()
    }
}

/// Largest relative deviation of the analytic gradient from centered finite
/// differences of the energy at `x`.
pub fn gradient_fd_error(p: &dyn Potential, x: &[f64], step: f64) -> f64 {
    let n = p.dim();
    let g = p.gradient_vec(x);
    let mut xp = x.to_vec();
    let mut worst = 0.0_f64;
    for k in 0..n {
        xp[k] = x[k] + step;
        let ep = p.energy(&xp);
        xp[k] = x[k] - step;
        let em = p.energy(&xp);
        xp[k] = x[k];
        let fd = (ep - em) / (2.0 * step);
        let scale = g[k].abs().max(fd.abs()).max(1.0);
        worst = worst.max((fd - g[k]).abs() / scale);
    }
    worst
}

/// Largest relative deviation of the analytic Hessian from centered finite
/// differences of the gradient at `x`.
pub fn hessian_fd_error(p: &dyn Potential, x: &[f64], step: f64) -> f64 {
    let n = p.dim();
    let h = p.hessian_vec(x);
    let mut xp = x.to_vec();
    let mut gp = vec![0.0; n];
    let mut gm = vec![0.0; n];
    let mut worst = 0.0_f64;
    for k in 0..n {
        xp[k] = x[k] + step;
        p.gradient(&xp, &mut gp);
        xp[k] = x[k] - step;
        p.gradient(&xp, &mut gm);
        xp[k] = x[k];
        for i in 0..n {
            let fd = (gp[i] - gm[i]) / (2.0 * step);
            let a = h[i * n + k];
            let scale = a.abs().max(fd.abs()).max(1.0);
            worst = worst.max((fd - a).abs() / scale);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn sample_points(p: &dyn Potential, count: usize) -> Vec<Vec<f64>> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let d = p.domain();
        (0..count)
            .map(|_| {
                d.lo.iter()
                    .zip(&d.hi)
                    .map(|(a, b)| a + 0.05 * (b - a) + 0.9 * (b - a) * rng.random::<f64>())
                    .collect()
            })
            .collect()
    }

    fn check_derivatives(p: &dyn Potential) {
        let scale = p.domain().diameter();
        for x in sample_points(p, 50) {
            assert!(gradient_fd_error(p, &x, 1e-5 * scale) <= 1e-5, "{p:?} at {x:?}");
            assert!(hessian_fd_error(p, &x, 1e-5 * scale) <= 1e-4, "{p:?} at {x:?}");
        }
    }

    #[test]
    fn polynomial_derivatives_match_finite_differences() {
        let p = Polynomial::new(
            vec![
                Monomial { coef: 1.0, powers: vec![4, 0] },
                Monomial { coef: -2.0, powers: vec![2, 0] },
                Monomial { coef: 0.7, powers: vec![1, 2] },
                Monomial { coef: 1.0, powers: vec![0, 2] },
                Monomial { coef: 0.3, powers: vec![3, 1] },
            ],
            DomainBox::cube(2, -2.0, 2.0),
            GrowthDeclaration::default(),
        )
        .unwrap();
        check_derivatives(&p);
    }

    #[test]
    fn gaussian_mixture_derivatives_match_finite_differences() {
        let conf = Polynomial::new(
            vec![
                Monomial { coef: 0.1, powers: vec![2, 0] },
                Monomial { coef: 0.1, powers: vec![0, 2] },
            ],
            DomainBox::cube(2, -3.0, 3.0),
            GrowthDeclaration::default(),
        )
        .unwrap();
        let p = GaussianMixture::new(
            conf,
            vec![
                GaussianBump { weight: -2.0, center: vec![-1.0, 0.0], width: 0.6 },
                GaussianBump { weight: -1.5, center: vec![1.0, 0.5], width: 0.5 },
            ],
        )
        .unwrap();
        check_derivatives(&p);
    }

    #[test]
    fn piecewise_polynomial_evaluates_per_piece() {
        // x^2 for x<0, x^2 + x^3 for x>=0: C^1 at the origin.
        let p = PiecewisePolynomial::new(
            vec![0.0],
            vec![vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 1.0, 1.0]],
            DomainBox::cube(1, -1.0, 1.0),
            GrowthDeclaration::default(),
        )
        .unwrap();
        assert_eq!(p.energy(&[-0.5]), 0.25);
        assert!((p.energy(&[0.5]) - 0.375).abs() < 1e-15);
        assert!((p.gradient_vec(&[0.5])[0] - (1.0 + 0.75)).abs() < 1e-15);
        assert!((p.hessian_vec(&[0.5])[0] - 5.0).abs() < 1e-15);
    }

    #[test]
    fn piecewise_polynomial_rejects_kinks() {
        let err = PiecewisePolynomial::new(
            vec![0.0],
            vec![vec![0.0, -1.0], vec![0.0, 1.0]],
            DomainBox::cube(1, -1.0, 1.0),
            GrowthDeclaration::default(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn domain_box_rejects_empty_axes() {
        assert!(DomainBox::new(vec![1.0], vec![1.0]).is_err());
        assert!(DomainBox::new(vec![0.0, 0.0], vec![1.0]).is_err());
    }
}
