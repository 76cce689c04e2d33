use serde::{Deserialize, Serialize};

use super::SpectralError;
use crate::landscape::DomainBox;

/// Uniform tensor grid with node-centred cells.
///
/// Interior nodes own a full cell of width `h`; the two end nodes of each axis
/// own half a cell, so the cells tile the box exactly. Node `i` has multi-index
/// `(i_0, .., i_{d-1})` with axis 0 varying fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    axes: Vec<Vec<f64>>,
    strides: Vec<usize>,
    len: usize,
}

impl Grid {
    pub fn uniform(lo: &[f64], hi: &[f64], nodes: &[usize]) -> Result<Self, SpectralError> {
        if lo.len() != hi.len() || lo.len() != nodes.len() || lo.is_empty() {
            return Err(SpectralError::InvalidGrid(format!(
                "axis lists have lengths {}, {}, {}",
                lo.len(),
                hi.len(),
                nodes.len()
            )));
        }
        let mut axes = Vec::with_capacity(lo.len());
        for k in 0..lo.len() {
            if nodes[k] < 2 || !(hi[k] > lo[k]) || !lo[k].is_finite() || !hi[k].is_finite() {
                return Err(SpectralError::InvalidGrid(format!(
                    "axis {k}: [{}, {}] with {} nodes",
                    lo[k], hi[k], nodes[k]
                )));
            }
            let h = (hi[k] - lo[k]) / (nodes[k] - 1) as f64;
            let mut axis: Vec<f64> = (0..nodes[k]).map(|i| lo[k] + i as f64 * h).collect();
            axis[nodes[k] - 1] = hi[k];
            axes.push(axis);
        }
        Ok(Self::from_axes(axes))
    }

    /// `nodes` per axis over a domain box.
    pub fn over(domain: &DomainBox, nodes: usize) -> Result<Self, SpectralError> {
        Self::uniform(&domain.lo, &domain.hi, &vec![nodes; domain.dim()])
    }

    fn from_axes(axes: Vec<Vec<f64>>) -> Self {
        let mut strides = Vec::with_capacity(axes.len());
        let mut len = 1;
        for a in &axes {
            strides.push(len);
            len *= a.len();
        }
        Self { axes, strides, len }
    }

    /// Tensor product with `self` on the leading axes.
    pub fn product(&self, other: &Grid) -> Grid {
        let mut axes = self.axes.clone();
        axes.extend(other.axes.iter().cloned());
        Self::from_axes(axes)
    }

    /// Grid of the axes in `range`.
    pub fn sub_grid(&self, range: std::ops::Range<usize>) -> Grid {
        Self::from_axes(self.axes[range].to_vec())
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn axis(&self, k: usize) -> &[f64] {
        &self.axes[k]
    }

    pub fn nodes_per_axis(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.len()).collect()
    }

    pub fn stride(&self, k: usize) -> usize {
        self.strides[k]
    }

    pub fn spacing(&self, k: usize) -> f64 {
        let a = &self.axes[k];
        (a[a.len() - 1] - a[0]) / (a.len() - 1) as f64
    }

    pub fn lo(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a[0]).collect()
    }

    pub fn hi(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a[a.len() - 1]).collect()
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn multi_index(&self, mut i: usize, out: &mut [usize]) {
        for (k, a) in self.axes.iter().enumerate() {
            out[k] = i % a.len();
            i /= a.len();
        }
    }

    /// Index along axis `k` of node `i`.
    #[inline]
    pub fn axis_index(&self, i: usize, k: usize) -> usize {
        (i / self.strides[k]) % self.axes[k].len()
    }

    pub fn node(&self, mut i: usize, out: &mut [f64]) {
        for (k, a) in self.axes.iter().enumerate() {
            out[k] = a[i % a.len()];
            i /= a.len();
        }
    }

    /// Width of the cell owned by node `idx` of axis `k`.
    #[inline]
    pub fn cell_width(&self, k: usize, idx: usize) -> f64 {
        let n = self.axes[k].len();
        let h = self.spacing(k);
        if idx == 0 || idx == n - 1 {
            0.5 * h
        } else {
            h
        }
    }

    pub fn cell_volume(&self, i: usize) -> f64 {
        (0..self.dim())
            .map(|k| self.cell_width(k, self.axis_index(i, k)))
            .product()
    }

    /// Node nearest to `x`, clamped to the grid.
    pub fn nearest(&self, x: &[f64]) -> usize {
        let mut i = 0;
        for (k, a) in self.axes.iter().enumerate() {
            let h = self.spacing(k);
            let j = ((x[k] - a[0]) / h).round().clamp(0.0, (a.len() - 1) as f64) as usize;
            i += j * self.strides[k];
        }
        i
    }
}
