use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    find_critical_points, saddle_height_1d, saddle_height_nd, CriticalKind, CriticalPoint,
    CriticalPointOptions, LandscapeError, LandscapeWarning, SaddleOptions, SharedPotential,
    Shifted,
};

#[derive(Clone, Debug)]
pub struct LandscapeOptions {
    pub critical: CriticalPointOptions,
    pub saddle: SaddleOptions,
    /// Ties in the global minimum or the dominating barrier closer than this
    /// are rejected.
    pub delta_tol: f64,
    /// Reject single-well potentials with `NoBarrier`. When false a
    /// one-minimum landscape is returned with `e_star = 0`.
    pub require_barrier: bool,
}

impl Default for LandscapeOptions {
    fn default() -> Self {
        Self {
            critical: CriticalPointOptions::default(),
            saddle: SaddleOptions::default(),
            delta_tol: 1e-9,
            require_barrier: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaddleEntry {
    pub saddle: CriticalPoint,
    pub height: f64,
}

/// Minima, communicating saddles and the critical depth of a potential.
///
/// Energies are normalized so the global minimum sits at zero; the normalized
/// potential is available through [`Landscape::potential`].
#[derive(Clone, Debug)]
pub struct Landscape {
    potential: SharedPotential,
    /// Added to the raw potential to obtain normalized energies.
    pub energy_offset: f64,
    /// Sorted by value; `minima[0]` is the global minimum with value 0.
    pub minima: Vec<CriticalPoint>,
    /// `saddles[i][j]` is the communicating saddle of `m_i` and `m_j`;
    /// the diagonal holds the minimum itself.
    pub saddles: Vec<Vec<SaddleEntry>>,
    /// Dominating minimum.
    pub p: usize,
    pub e_star: f64,
    pub delta_gap: f64,
    pub critical_points: Vec<CriticalPoint>,
    pub warnings: Vec<LandscapeWarning>,
}

impl Landscape {
    pub fn potential(&self) -> &SharedPotential {
        &self.potential
    }

    pub fn dim(&self) -> usize {
        self.potential.dim()
    }

    pub fn n_minima(&self) -> usize {
        self.minima.len()
    }

    /// `H(s_ij) - H(m_i)`.
    pub fn barrier(&self, i: usize, j: usize) -> f64 {
        self.saddles[i][j].height - self.minima[i].value
    }

    /// The communicating saddle `s_p1` between the dominating and global minimum.
    pub fn critical_saddle(&self) -> &CriticalPoint {
        &self.saddles[self.p][0].saddle
    }

    /// `H(m_p)`.
    pub fn dominating_depth(&self) -> f64 {
        self.minima[self.p].value
    }
}

/// Extract minima, saddle table and critical depth; see [`Landscape`].
pub fn build_landscape(
    raw: SharedPotential,
    opts: &LandscapeOptions,
) -> Result<Landscape, LandscapeError> {
    let cps = find_critical_points(raw.as_ref(), &opts.critical)?;
    let mut minima: Vec<CriticalPoint> = cps
        .iter()
        .filter(|c| c.kind == CriticalKind::Minimum)
        .cloned()
        .collect();
    minima.sort_by(|a, b| a.value.total_cmp(&b.value));
    if minima.len() >= 2 && minima[1].value - minima[0].value < opts.delta_tol {
        return Err(LandscapeError::NonUniqueGlobalMin(minima[0].value, minima[1].value));
    }
    if minima.len() < 2 && opts.require_barrier {
        return Err(LandscapeError::NoBarrier);
    }

    let offset = -minima[0].value;
    let potential: SharedPotential = Arc::new(Shifted::new(raw.clone(), offset));
    let mut critical_points = cps;
    for c in critical_points.iter_mut().chain(minima.iter_mut()) {
        c.value += offset;
    }
    minima[0].value = 0.0;

    let n_min = minima.len();
    let mut warnings = Vec::new();
    let growth = raw.growth();
    if !growth.poincare || !growth.log_sobolev {
        warnings.push(LandscapeWarning::GrowthNotDeclared {
            poincare: growth.poincare,
            log_sobolev: growth.log_sobolev,
        });
    }

    let mut saddles: Vec<Vec<Option<SaddleEntry>>> = vec![vec![None; n_min]; n_min];
    for i in 0..n_min {
        saddles[i][i] = Some(SaddleEntry {
            saddle: minima[i].clone(),
            height: minima[i].value,
        });
        for j in (i + 1)..n_min {
            let search = if potential.dim() == 1 {
                saddle_height_1d(
                    potential.as_ref(),
                    minima[i].location[0],
                    minima[j].location[0],
                    &opts.saddle,
                )?
            } else {
                let s = saddle_height_nd(
                    potential.as_ref(),
                    &minima[i].location,
                    &minima[j].location,
                    &opts.saddle,
                )?;
                if !s.refined {
                    warnings.push(LandscapeWarning::SaddleNotRefined {
                        pair: (i, j),
                        grid_height: s.height,
                    });
                }
                s
            };
            let entry = SaddleEntry {
                height: search.height,
                saddle: search.saddle,
            };
            saddles[i][j] = Some(entry.clone());
            saddles[j][i] = Some(entry);
        }
    }
    let saddles: Vec<Vec<SaddleEntry>> = saddles
        .into_iter()
        .map(|row| row.into_iter().map(|e| e.expect("filled above")).collect())
        .collect();

    let (p, e_star, delta_gap) = if n_min == 1 {
        (0, 0.0, 0.0)
    } else {
        let barriers: Vec<f64> = (0..n_min)
            .map(|i| saddles[i][0].height - minima[i].value)
            .collect();
        let p = (1..n_min)
            .max_by(|a, b| barriers[*a].total_cmp(&barriers[*b]))
            .expect("at least two minima");
        let e_star = barriers[p];
        let runner_up = (0..n_min)
            .filter(|i| *i != p)
            .map(|i| barriers[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let delta_gap = e_star - runner_up;
        if delta_gap < opts.delta_tol {
            return Err(LandscapeError::AssumptionViolation(format!(
                "dominating barrier {e_star} is tied with {runner_up} within {}",
                opts.delta_tol
            )));
        }
        if !(e_star > 0.0) {
            return Err(LandscapeError::AssumptionViolation(format!(
                "critical depth {e_star} is not positive"
            )));
        }
        (p, e_star, delta_gap)
    };

    Ok(Landscape {
        potential,
        energy_offset: offset,
        minima,
        saddles,
        p,
        e_star,
        delta_gap,
        critical_points,
        warnings,
    })
}

/// One cell of the 1D admissible partition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionInterval {
    pub lo: f64,
    pub hi: f64,
    /// Index into `Landscape::minima`.
    pub minimum: usize,
}

/// Split the line at the communicating saddles of neighbouring minima.
pub fn admissible_partition_1d(l: &Landscape) -> Result<Vec<PartitionInterval>, LandscapeError> {
    if l.dim() != 1 {
        return Err(LandscapeError::WrongDimension {
            expected: "1".into(),
            got: l.dim(),
        });
    }
    let mut order: Vec<usize> = (0..l.n_minima()).collect();
    order.sort_by(|a, b| l.minima[*a].location[0].total_cmp(&l.minima[*b].location[0]));
    let mut out = Vec::with_capacity(order.len());
    let mut lo = f64::NEG_INFINITY;
    for w in 0..order.len() {
        let hi = if w + 1 < order.len() {
            l.saddles[order[w]][order[w + 1]].saddle.location[0]
        } else {
            f64::INFINITY
        };
        out.push(PartitionInterval {
            lo,
            hi,
            minimum: order[w],
        });
        lo = hi;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::{corpus_potential, Translated};

    fn tilted() -> Landscape {
        build_landscape(
            corpus_potential("tilted_double_well").unwrap(),
            &LandscapeOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn tilted_double_well_structure() {
        let h = |x: f64| (x * x - 1.0_f64).powi(2) + 0.25 * (x + 1.0);
        let l = tilted();
        assert_eq!(l.n_minima(), 2);
        assert_eq!(l.p, 1);
        assert_eq!(l.minima[0].value, 0.0);
        assert!(l.minima[0].location[0] < 0.0 && l.minima[1].location[0] > 0.0);
        let (m1, m2, s) = (
            l.minima[0].location[0],
            l.minima[1].location[0],
            l.critical_saddle().location[0],
        );
        let want = h(s) - h(m2);
        assert!((l.e_star - want).abs() < 1e-12);
        assert!((l.minima[1].value - (h(m2) - h(m1))).abs() < 1e-12);
        assert_eq!(l.delta_gap, l.e_star);
        // Normalized potential vanishes at the global minimum.
        assert!(l.potential().energy(&[m1]).abs() < 1e-15);
    }

    #[test]
    fn saddle_table_is_symmetric() {
        let l = build_landscape(
            corpus_potential("triple_well").unwrap(),
            &LandscapeOptions::default(),
        )
        .unwrap();
        assert_eq!(l.n_minima(), 3);
        for i in 0..3 {
            assert_eq!(l.saddles[i][i].height, l.minima[i].value);
            for j in 0..3 {
                assert_eq!(l.saddles[i][j].height, l.saddles[j][i].height);
            }
        }
        for i in 0..3 {
            if i != l.p {
                assert!(l.e_star >= l.barrier(i, 0) + l.delta_gap - 1e-15);
            }
        }
        assert!(l.e_star > 0.0);
    }

    #[test]
    fn single_well_has_no_barrier() {
        let err = build_landscape(
            corpus_potential("quadratic").unwrap(),
            &LandscapeOptions::default(),
        )
        .unwrap_err();
        assert_eq!(err, LandscapeError::NoBarrier);
    }

    #[test]
    fn symmetric_double_well_is_rejected() {
        let err = build_landscape(
            corpus_potential("double_well").unwrap(),
            &LandscapeOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, LandscapeError::NonUniqueGlobalMin(..)));
    }

    #[test]
    fn translation_moves_points_rigidly() {
        let raw = corpus_potential("tilted_double_well_2d").unwrap();
        let shift = vec![0.37, -0.21];
        let moved = Arc::new(Translated::new(raw.clone(), shift.clone()));
        let a = build_landscape(raw, &LandscapeOptions::default()).unwrap();
        let b = build_landscape(moved, &LandscapeOptions::default()).unwrap();
        assert_eq!(a.n_minima(), b.n_minima());
        for (u, v) in a.minima.iter().zip(&b.minima) {
            for k in 0..2 {
                assert!((u.location[k] + shift[k] - v.location[k]).abs() < 1e-8);
            }
            assert!((u.value - v.value).abs() < 1e-8);
            for (e, f) in u.hess_eigenvalues.iter().zip(&v.hess_eigenvalues) {
                assert!((e - f).abs() < 1e-8);
            }
        }
        assert!((a.e_star - b.e_star).abs() < 1e-8);
    }

    #[test]
    fn minima_count_exceeds_saddle_count_by_one_in_1d() {
        for id in ["tilted_double_well", "triple_well", "quadratic"] {
            let cps = find_critical_points(
                corpus_potential(id).unwrap().as_ref(),
                &CriticalPointOptions::default(),
            )
            .unwrap();
            let mins = cps.iter().filter(|c| c.kind == CriticalKind::Minimum).count();
            let sads = cps.iter().filter(|c| c.kind == CriticalKind::Saddle).count();
            assert_eq!(mins, sads + 1, "{id}");
        }
    }

    #[test]
    fn partitions() {
        let l = tilted();
        let parts = admissible_partition_1d(&l).unwrap();
        let s = l.critical_saddle().location[0];
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].lo, f64::NEG_INFINITY);
        assert_eq!(parts[0].hi, s);
        assert_eq!(parts[1].lo, s);
        assert_eq!(parts[1].hi, f64::INFINITY);
        assert_eq!(parts[0].minimum, 0);

        let l3 = build_landscape(
            corpus_potential("triple_well").unwrap(),
            &LandscapeOptions::default(),
        )
        .unwrap();
        let parts = admissible_partition_1d(&l3).unwrap();
        let single = build_landscape(
            corpus_potential("quadratic").unwrap(),
            &LandscapeOptions {
                require_barrier: false,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(
            admissible_partition_1d(&single).unwrap(),
            vec![PartitionInterval {
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
                minimum: 0
            }]
        );
        assert_eq!(parts.len(), 3);
        assert!(parts[0].hi < parts[1].hi);
        for part in &parts {
            let m = l3.minima[part.minimum].location[0];
            assert!(part.lo < m && m < part.hi);
        }
    }
}
