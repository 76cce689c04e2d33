//! Side-by-side comparison of per-method results on one potential.

use serde::{Deserialize, Serialize};

use isa_core::dynamics::{wilson_interval, SamplerKind};

use crate::output::{mean_ci, opt, write_csv};
use crate::CliError;

/// Metrics of one method on one potential.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub potential: String,
    pub method: SamplerKind,
    /// Jump rate of the tempering variants; `None` otherwise.
    pub swap_rate: Option<f64>,
    /// Discrete spectral gap, where a reversible form exists.
    pub gap: Option<f64>,
    /// Predicted upper bound on `1 / gap`.
    pub predicted_bound: Option<f64>,
    /// `(seed, TV distance to the method's target)` at a fixed step budget.
    pub tv: Vec<(u64, f64)>,
    /// `(seed, annealing success)`, when annealing was run.
    pub anneal: Option<Vec<(u64, bool)>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn write_csv(&self, path: &std::path::Path) -> Result<(), CliError> {
        write_csv(path, &self.header, &self.rows)
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k].as_str()).collect())
    }
}

pub const COMPARE_COLUMNS: [&str; 12] = [
    "method",
    "swap_rate",
    "gap",
    "predicted_bound",
    "tv_mean",
    "tv_ci_low",
    "tv_ci_high",
    "sa_success",
    "sa_ci_low",
    "sa_ci_high",
    "n_seeds",
    "seeds",
];

fn method_rank(k: SamplerKind) -> u8 {
    match k {
        SamplerKind::Langevin => 0,
        SamplerKind::Isa => 1,
        SamplerKind::PtPosition => 2,
        SamplerKind::PtTemperature => 3,
    }
}

/// Align results into one row per method, ordered Langevin, isa, position
/// swaps, temperature swaps, then by swap rate. Needs at least two results
/// on the same potential.
pub fn report_compare(results: &[RunResult], confidence: f64) -> Result<Table, CliError> {
    if results.len() < 2 {
        return Err(CliError::IncompatibleRuns(format!(
            "need at least two result sets, got {}",
            results.len()
        )));
    }
    let pot = &results[0].potential;
    if let Some(r) = results.iter().find(|r| &r.potential != pot) {
        return Err(CliError::IncompatibleRuns(format!(
            "results mix potentials `{pot}` and `{}`",
            r.potential
        )));
    }
    let mut sorted: Vec<&RunResult> = results.iter().collect();
    sorted.sort_by(|a, b| {
        method_rank(a.method)
            .cmp(&method_rank(b.method))
            .then(a.swap_rate.unwrap_or(0.0).total_cmp(&b.swap_rate.unwrap_or(0.0)))
    });
    let rows = sorted
        .into_iter()
        .map(|r| {
            let mut seeds: Vec<u64> = r.tv.iter().map(|s| s.0).collect();
            if let Some(a) = &r.anneal {
                seeds.extend(a.iter().map(|s| s.0));
            }
            seeds.sort_unstable();
            seeds.dedup();
            let tvs: Vec<f64> = r.tv.iter().map(|s| s.1).collect();
            let tv = mean_ci(&tvs, confidence);
            let sa = r.anneal.as_ref().filter(|a| !a.is_empty()).map(|a| {
                let k = a.iter().filter(|s| s.1).count() as u64;
                let n = a.len() as u64;
                let (lo, hi) = wilson_interval(k, n, confidence);
                (k as f64 / n as f64, lo, hi)
            });
            vec![
                r.method.name().to_string(),
                opt(r.swap_rate),
                opt(r.gap),
                opt(r.predicted_bound),
                opt(tv.map(|c| c.mean)),
                opt(tv.map(|c| c.ci_low)),
                opt(tv.map(|c| c.ci_high)),
                opt(sa.map(|s| s.0)),
                opt(sa.map(|s| s.1)),
                opt(sa.map(|s| s.2)),
                seeds.len().to_string(),
                seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(";"),
            ]
        })
        .collect();
    Ok(Table {
        header: COMPARE_COLUMNS.iter().map(|s| s.to_string()).collect(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(method: SamplerKind, gap: f64) -> RunResult {
        RunResult {
            potential: "tilted_double_well".into(),
            method,
            swap_rate: None,
            gap: Some(gap),
            predicted_bound: None,
            tv: vec![(0, 0.1), (1, 0.2)],
            anneal: Some(vec![(0, true), (1, false)]),
        }
    }

    #[test]
    fn rows_are_ordered_by_method() {
        let t = report_compare(&[result(SamplerKind::Isa, 0.5), result(SamplerKind::Langevin, 0.1)], 0.95).unwrap();
        assert_eq!(t.column("method").unwrap(), vec!["langevin", "isa"]);
        assert_eq!(t.column("sa_success").unwrap(), vec!["0.5", "0.5"]);
        assert_eq!(t.column("seeds").unwrap()[0], "0;1");
    }

    #[test]
    fn mixed_potentials_are_rejected() {
        let mut b = result(SamplerKind::Isa, 0.5);
        b.potential = "triple_well".into();
        let e = report_compare(&[result(SamplerKind::Langevin, 0.1), b], 0.95);
        assert!(matches!(e, Err(CliError::IncompatibleRuns(_))));
    }
}
