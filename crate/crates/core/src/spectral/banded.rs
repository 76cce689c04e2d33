/// Symmetric positive definite band matrix with its Cholesky factor.
///
/// Row `i` stores entries `(i, i - b) ..= (i, i)` of the lower triangle in a
/// contiguous slice of length `b + 1`, so the inner products of the
/// factorization run over contiguous memory.
#[derive(Clone, Debug)]
pub struct BandCholesky {
    n: usize,
    b: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    /// Factor the matrix whose lower band is filled by `fill(i, j)` for
    /// `i - b <= j <= i`. Returns `None` on a non-positive pivot.
    pub fn factor(n: usize, bandwidth: usize, fill: impl Fn(usize, usize) -> f64) -> Option<Self> {
        let b = bandwidth;
        let w = b + 1;
        let mut l = vec![0.0; n * w];
        for i in 0..n {
            let j0 = i.saturating_sub(b);
            for j in j0..=i {
                let mut s = fill(i, j);
                // Columns shared by rows i and j inside both bands.
                let k0 = j0.max(j.saturating_sub(b));
                let ri = i * w + b - i;
                let rj = j * w + b - j;
                for k in k0..j {
                    s -= l[ri + k] * l[rj + k];
                }
                if i == j {
                    if !(s > 0.0) {
                        return None;
                    }
                    l[ri + i] = s.sqrt();
                } else {
                    l[ri + j] = s / l[rj + j];
                }
            }
        }
        Some(Self { n, b, l })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Solve `L L^T x = rhs` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, b, w) = (self.n, self.b, self.b + 1);
        for i in 0..n {
            let ri = i * w + b - i;
            let mut s = x[i];
            for k in i.saturating_sub(b)..i {
                s -= self.l[ri + k] * x[k];
            }
            x[i] = s / self.l[ri + i];
        }
        for i in (0..n).rev() {
            let ri = i * w + b - i;
            x[i] /= self.l[ri + i];
            let xi = x[i];
            for k in i.saturating_sub(b)..i {
                x[k] -= self.l[ri + k] * xi;
            }
        }
    }
}
