//! Experiment configuration: a TOML file with fixed sections, optionally
//! patched by `section.key=value` overrides. Unknown keys are rejected.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use isa_core::dynamics::{Observable, SamplerKind, Schedule};
use isa_core::landscape::{
    corpus_potential, DomainBox, GaussianBump, GaussianMixture, GrowthDeclaration, Monomial,
    PiecewisePolynomial, Polynomial,
};
use isa_core::{PredictionConstants, SharedPotential, TemperaturePair};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Predict,
    Sample,
    Anneal,
    Spectrum,
    Compare,
    Deviation,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Predict => "predict",
            ExperimentKind::Sample => "sample",
            ExperimentKind::Anneal => "anneal",
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::Compare => "compare",
            ExperimentKind::Deviation => "deviation",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    /// Must match the subcommand when given.
    pub kind: Option<ExperimentKind>,
    pub output: Option<PathBuf>,
    pub seeds: Vec<u64>,
    /// Two-sided level of every confidence interval in the outputs.
    pub confidence: f64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            kind: None,
            output: None,
            seeds: vec![0],
            confidence: 0.95,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonomialSpec {
    pub coef: f64,
    pub powers: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpSpec {
    pub weight: f64,
    pub center: Vec<f64>,
    pub width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Corpus {
        id: String,
    },
    Polynomial {
        lo: Vec<f64>,
        hi: Vec<f64>,
        terms: Vec<MonomialSpec>,
    },
    PiecewisePolynomial {
        lo: f64,
        hi: f64,
        breaks: Vec<f64>,
        /// Ascending coefficients per piece, in the global coordinate.
        pieces: Vec<Vec<f64>>,
    },
    GaussianMixture {
        lo: Vec<f64>,
        hi: Vec<f64>,
        confinement: Vec<MonomialSpec>,
        bumps: Vec<BumpSpec>,
    },
}

impl PotentialSpec {
    pub fn label(&self) -> String {
        match self {
            PotentialSpec::Corpus { id } => id.clone(),
            PotentialSpec::Polynomial { .. } => "polynomial".into(),
            PotentialSpec::PiecewisePolynomial { .. } => "piecewise_polynomial".into(),
            PotentialSpec::GaussianMixture { .. } => "gaussian_mixture".into(),
        }
    }

    pub fn build(&self) -> Result<SharedPotential, CliError> {
        let cfg = |e: isa_core::landscape::LandscapeError| CliError::Config(format!("potential: {e}"));
        let monos = |t: &[MonomialSpec]| {
            t.iter()
                .map(|m| Monomial {
                    coef: m.coef,
                    powers: m.powers.clone(),
                })
                .collect::<Vec<_>>()
        };
        let g = GrowthDeclaration::BOTH;
        Ok(match self {
            PotentialSpec::Corpus { id } => corpus_potential(id).map_err(cfg)?,
            PotentialSpec::Polynomial { lo, hi, terms } => {
                let d = DomainBox::new(lo.clone(), hi.clone()).map_err(cfg)?;
                Arc::new(Polynomial::new(monos(terms), d, g).map_err(cfg)?)
            }
            PotentialSpec::PiecewisePolynomial { lo, hi, breaks, pieces } => {
                let d = DomainBox::new(vec![*lo], vec![*hi]).map_err(cfg)?;
                Arc::new(PiecewisePolynomial::new(breaks.clone(), pieces.clone(), d, g).map_err(cfg)?)
            }
            PotentialSpec::GaussianMixture { lo, hi, confinement, bumps } => {
                let d = DomainBox::new(lo.clone(), hi.clone()).map_err(cfg)?;
                let c = Polynomial::new(monos(confinement), d, g).map_err(cfg)?;
                let b = bumps
                    .iter()
                    .map(|b| GaussianBump {
                        weight: b.weight,
                        center: b.center.clone(),
                        width: b.width,
                    })
                    .collect();
                Arc::new(GaussianMixture::new(c, b).map_err(cfg)?)
            }
        })
    }
}

/// Any two of `tau1`, `tau2`, `k = tau2 / tau1`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemperatureSpec {
    pub tau1: Option<f64>,
    pub tau2: Option<f64>,
    pub k: Option<f64>,
}

impl TemperatureSpec {
    /// Resolve to a pair. With `allow_equal` (Langevin runs, which use only
    /// `tau1`) a lone `tau1` or `tau1 == tau2` gives equal temperatures.
    pub fn resolve(&self, allow_equal: bool) -> Result<TemperaturePair, CliError> {
        let bad = |e: isa_core::gibbs::GibbsError| CliError::Config(format!("temperatures: {e}"));
        let t = match (self.tau1, self.tau2, self.k) {
            (Some(a), Some(b), None) if allow_equal && a == b && a > 0.0 => TemperaturePair::equal(a),
            (Some(a), Some(b), None) => TemperaturePair::new(a, b).map_err(bad)?,
            (Some(a), None, Some(k)) => TemperaturePair::from_ratio(a, k).map_err(bad)?,
            (None, Some(b), Some(k)) => TemperaturePair::from_ratio(b / k, k).map_err(bad)?,
            (Some(a), None, None) if allow_equal => {
                if !(a > 0.0 && a.is_finite()) {
                    return Err(CliError::Config(format!("temperatures: tau1 = {a}")));
                }
                TemperaturePair::equal(a)
            }
            _ => {
                return Err(CliError::Config(
                    "temperatures: give exactly two of tau1, tau2, k".into(),
                ))
            }
        };
        Ok(t)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub e: f64,
    pub k: f64,
}

impl ScheduleSpec {
    pub fn resolve(&self) -> Result<Schedule, CliError> {
        Schedule::logarithmic(self.e, self.k).map_err(|e| CliError::Config(format!("schedule: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSpec {
    #[serde(default = "default_kind")]
    pub kind: SamplerKind,
    #[serde(default)]
    pub swap_rate: f64,
    /// Swap rates of the tempering rows in `compare`.
    #[serde(default)]
    pub swap_rates: Vec<f64>,
}

fn default_kind() -> SamplerKind {
    SamplerKind::Isa
}

impl Default for SamplerSpec {
    fn default() -> Self {
        Self {
            kind: SamplerKind::Isa,
            swap_rate: 0.0,
            swap_rates: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SdeSection {
    pub dt: f64,
    pub n_steps: u64,
    pub burn_in: u64,
    pub thinning: u64,
    pub record: Vec<Observable>,
    pub stability_cap: Option<f64>,
}

impl Default for SdeSection {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            n_steps: 100_000,
            burn_in: 0,
            thinning: 100,
            record: Observable::ALL.to_vec(),
            stability_cap: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    pub x1: Vec<f64>,
    pub x2: Option<Vec<f64>>,
    #[serde(default)]
    pub z: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    /// Nodes per axis.
    pub nodes: usize,
    pub max_nodes: usize,
    /// Write the form as `(row, col, value)` triplets plus the mass vector.
    pub export_matrix: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            nodes: 160,
            max_nodes: isa_core::spectral::DEFAULT_MAX_NODES,
            export_matrix: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HistogramSpec {
    /// Bins per axis over the domain box.
    pub bins: usize,
    /// Midpoint sub-cells per axis for the reference masses.
    pub refine: usize,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        Self { bins: 40, refine: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnealSpec {
    /// Success threshold; defaults to `delta_factor * E*`.
    pub delta: Option<f64>,
    pub delta_factor: f64,
    /// Also run the Langevin arm on the same seeds.
    pub baseline: bool,
}

impl Default for AnnealSpec {
    fn default() -> Self {
        Self {
            delta: None,
            delta_factor: 0.2,
            baseline: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialChoice {
    Mu,
    Point,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviationSpec {
    pub horizons: Vec<f64>,
    pub radii: Vec<f64>,
    pub replicas: u64,
    pub grid_nodes: usize,
    pub initial: InitialChoice,
    /// The observable is `clamp(x1[coordinate] / scale, -1, 1)`.
    pub coordinate: usize,
    pub scale: f64,
}

impl Default for DeviationSpec {
    fn default() -> Self {
        Self {
            horizons: vec![10.0, 50.0],
            radii: vec![0.2, 0.5],
            replicas: 100,
            grid_nodes: 200,
            initial: InitialChoice::Mu,
            coordinate: 0,
            scale: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictionSpec {
    pub phi_weight: f64,
    pub band_constant: f64,
}

impl Default for PredictionSpec {
    fn default() -> Self {
        let c = PredictionConstants::default();
        Self {
            phi_weight: c.phi_weight,
            band_constant: c.band_constant,
        }
    }
}

impl PredictionSpec {
    pub fn constants(&self) -> PredictionConstants {
        PredictionConstants {
            phi_weight: self.phi_weight,
            band_constant: self.band_constant,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: ExperimentSection,
    pub potential: PotentialSpec,
    #[serde(default)]
    pub temperatures: TemperatureSpec,
    pub schedule: Option<ScheduleSpec>,
    #[serde(default)]
    pub sampler: SamplerSpec,
    #[serde(default)]
    pub sde: SdeSection,
    pub init: Option<InitSpec>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub histogram: HistogramSpec,
    #[serde(default)]
    pub anneal: AnnealSpec,
    #[serde(default)]
    pub deviation: DeviationSpec,
    #[serde(default)]
    pub prediction: PredictionSpec,
}

/// Parse `value` as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Apply one `a.b.c=value` override to a parsed table.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!("override key `{path}` is malformed")));
    }
    let mut cur = table;
    for k in &keys[..keys.len() - 1] {
        let entry = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override `{path}`: `{k}` is not a section")))?;
    }
    cur.insert(keys[keys.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut table: toml::Table = text.parse().map_err(|e| CliError::Config(format!("config: {e}")))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(format!("config: {}", e.message())))
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn output_dir(&self, kind: ExperimentKind) -> PathBuf {
        self.experiment
            .output
            .clone()
            .unwrap_or_else(|| PathBuf::from("runs").join(kind.name()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[potential]
kind = "corpus"
id = "tilted_double_well"

[temperatures]
tau1 = 0.05
k = 3.0
"#;

    #[test]
    fn parses_and_resolves() {
        let c = ExperimentConfig::from_toml(BASE, &[]).unwrap();
        let t = c.temperatures.resolve(false).unwrap();
        assert!((t.tau2 - 0.15).abs() < 1e-15);
        assert_eq!(c.sampler.kind, SamplerKind::Isa);
        assert_eq!(c.experiment.seeds, vec![0]);
        assert!(c.potential.build().is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{BASE}\n[sde]\ndt = 0.01\nbogus = 1\n");
        assert!(matches!(ExperimentConfig::from_toml(&text, &[]), Err(CliError::Config(_))));
        let text = format!("{BASE}\n[nonsense]\na = 1\n");
        assert!(ExperimentConfig::from_toml(&text, &[]).is_err());
    }

    #[test]
    fn overrides_patch_values() {
        let c = ExperimentConfig::from_toml(
            BASE,
            &["sde.dt=0.002".into(), "sampler.kind=langevin".into(), "experiment.seeds=[3, 4]".into()],
        )
        .unwrap();
        assert_eq!(c.sde.dt, 0.002);
        assert_eq!(c.sampler.kind, SamplerKind::Langevin);
        assert_eq!(c.experiment.seeds, vec![3, 4]);
        assert!(ExperimentConfig::from_toml(BASE, &["sde.dtt=1".into()]).is_err());
        assert!(ExperimentConfig::from_toml(BASE, &["novalue".into()]).is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = ExperimentConfig::from_toml(BASE, &[]).unwrap();
        let back = ExperimentConfig::from_toml(&c.to_toml(), &[]).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn temperature_combinations() {
        let t = TemperatureSpec {
            tau1: None,
            tau2: Some(0.3),
            k: Some(3.0),
        };
        assert!((t.resolve(false).unwrap().tau1 - 0.1).abs() < 1e-15);
        let lone = TemperatureSpec {
            tau1: Some(0.2),
            ..Default::default()
        };
        assert!(lone.resolve(false).is_err());
        assert_eq!(lone.resolve(true).unwrap().tau2, 0.2);
    }

    #[test]
    fn custom_potentials_build() {
        let text = r#"
[potential]
kind = "piecewise_polynomial"
lo = -2.0
hi = 2.0
breaks = [0.0]
pieces = [[0.0, 0.0, 1.0], [0.0, 0.0, 1.0, 1.0]]
"#;
        let c = ExperimentConfig::from_toml(text, &[]).unwrap();
        assert!(c.potential.build().is_ok());
        let text = r#"
[potential]
kind = "gaussian_mixture"
lo = [-3.0]
hi = [3.0]
confinement = [{ coef = 0.5, powers = [2] }]
bumps = [{ weight = -1.0, center = [1.0], width = 0.5 }]
"#;
        let c = ExperimentConfig::from_toml(text, &[]).unwrap();
        assert!(c.potential.build().is_ok());
    }
}
