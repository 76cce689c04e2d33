use serde::{Deserialize, Serialize};

use super::{ChainState, DynamicsError};
use crate::gibbs::{log_add_exp, log_mu_from_energies, TemperaturePair};
use crate::landscape::Potential;

/// Regular histogram on a box; state coordinates are `x1` followed by `x2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub bins: Vec<usize>,
    pub counts: Vec<u64>,
    /// Samples that fell outside the box.
    pub outside: u64,
}

impl Histogram {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, bins: Vec<usize>) -> Result<Self, DynamicsError> {
        if lo.len() != hi.len() || lo.len() != bins.len() || lo.is_empty() {
            return Err(DynamicsError::InvalidConfig("histogram bounds and bins disagree in length".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) || bins.contains(&0) {
            return Err(DynamicsError::InvalidConfig("histogram needs lo < hi and at least one bin per axis".into()));
        }
        let len = bins.iter().product();
        Ok(Self {
            lo,
            hi,
            bins,
            counts: vec![0; len],
            outside: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.bins.len()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Flat bin index, axis 0 fastest.
    pub fn index<'a>(&self, x: impl IntoIterator<Item = &'a f64>) -> Option<usize> {
        let mut idx = 0;
        let mut stride = 1;
        let mut k = 0;
        for v in x {
            if k >= self.dim() {
                return None;
            }
            let (a, b, n) = (self.lo[k], self.hi[k], self.bins[k]);
            if !(*v >= a && *v <= b) {
                return None;
            }
            let i = (((v - a) / (b - a)) * n as f64) as usize;
            idx += i.min(n - 1) * stride;
            stride *= n;
            k += 1;
        }
        (k == self.dim()).then_some(idx)
    }

    pub fn add(&mut self, x: &[f64]) {
        match self.index(x) {
            Some(i) => self.counts[i] += 1,
            None => self.outside += 1,
        }
    }

    pub fn add_state(&mut self, s: &ChainState) {
        match self.index(s.x1.iter().chain(&s.x2)) {
            Some(i) => self.counts[i] += 1,
            None => self.outside += 1,
        }
    }

    pub fn merge(&mut self, other: &Histogram) -> Result<(), DynamicsError> {
        if self.lo != other.lo || self.hi != other.hi || self.bins != other.bins {
            return Err(DynamicsError::InvalidConfig("histograms have different bins".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.outside += other.outside;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Bin frequencies among the samples inside the box.
    pub fn probabilities(&self) -> Vec<f64> {
        let n = self.total().max(1) as f64;
        self.counts.iter().map(|c| *c as f64 / n).collect()
    }

    /// Lower corner of bin `i` and the bin widths.
    pub fn bin_box(&self, mut i: usize) -> (Vec<f64>, Vec<f64>) {
        let mut corner = Vec::with_capacity(self.dim());
        let mut width = Vec::with_capacity(self.dim());
        for k in 0..self.dim() {
            let n = self.bins[k];
            let w = (self.hi[k] - self.lo[k]) / n as f64;
            corner.push(self.lo[k] + (i % n) as f64 * w);
            width.push(w);
            i /= n;
        }
        (corner, width)
    }

    /// Bin masses of the density `exp(log_density)` restricted to the box and
    /// normalized, by the midpoint rule on `refine` sub-cells per axis.
    pub fn reference(
        &self,
        log_density: impl Fn(&[f64]) -> f64,
        refine: usize,
    ) -> Result<Vec<f64>, DynamicsError> {
        let refine = refine.max(1);
        let d = self.dim();
        let sub = refine.pow(d as u32);
        let mut x = vec![0.0; d];
        let log_w: Vec<f64> = (0..self.len())
            .map(|i| {
                let (corner, width) = self.bin_box(i);
                let mut acc = f64::NEG_INFINITY;
                for q in 0..sub {
                    let mut r = q;
                    for k in 0..d {
                        x[k] = corner[k] + ((r % refine) as f64 + 0.5) * width[k] / refine as f64;
                        r /= refine;
                    }
                    acc = log_add_exp(acc, log_density(&x));
                }
                acc
            })
            .collect();
        let top = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Err(DynamicsError::InvalidConfig("reference density vanishes on the histogram box".into()));
        }
        let w: Vec<f64> = log_w.iter().map(|v| (v - top).exp()).collect();
        let s: f64 = w.iter().sum();
        Ok(w.into_iter().map(|v| v / s).collect())
    }

    /// Reference masses of `mu` on a `2n`-dimensional histogram.
    pub fn mu_reference(
        &self,
        p: &dyn Potential,
        t: &TemperaturePair,
        refine: usize,
    ) -> Result<Vec<f64>, DynamicsError> {
        let n = p.dim();
        if self.dim() != 2 * n {
            return Err(DynamicsError::InvalidConfig(format!(
                "mu reference needs {} histogram axes, got {}",
                2 * n,
                self.dim()
            )));
        }
        self.reference(|x| log_mu_from_energies(t, p.energy(&x[..n]), p.energy(&x[n..])), refine)
    }

    /// Reference masses of the Gibbs measure at `tau`.
    pub fn gibbs_reference(&self, p: &dyn Potential, tau: f64, refine: usize) -> Result<Vec<f64>, DynamicsError> {
        if self.dim() != p.dim() {
            return Err(DynamicsError::InvalidConfig("Gibbs reference needs one axis per coordinate".into()));
        }
        self.reference(|x| -p.energy(x) / tau, refine)
    }
}
