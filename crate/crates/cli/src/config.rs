//! Experiment configuration files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rscusum::lfd::{LfdPair, MeanPolytope, TrainConfig};
use rscusum::ScoreModel;
use serde::Deserialize;

use crate::CliError;

pub const CONFIG_VERSION: u32 = 1;

/// A model given inline or by name from the `models` table.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ModelRef {
    Name(String),
    Inline(Box<ScoreModel>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Polytope(MeanPolytope),
    Basis(Vec<ModelRef>),
}

#[derive(Debug, Clone, Deserialize)]
pub struct Families {
    pub inf: Family,
    pub post: Family,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LfdSection {
    #[serde(default = "default_drift_samples")]
    pub drift_check_samples: usize,
    #[serde(default)]
    pub train: TrainConfig,
}

impl Default for LfdSection {
    fn default() -> Self {
        Self { drift_check_samples: default_drift_samples(), train: TrainConfig::default() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    pub p_inf: ModelRef,
    #[serde(default = "q_inf")]
    pub q_inf: ModelRef,
    #[serde(default = "q_post")]
    pub q_post: ModelRef,
    #[serde(default = "default_calibration_samples")]
    pub samples: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub gammas: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub model_inf: ModelRef,
    pub model_post: ModelRef,
    #[serde(default)]
    pub threshold: f64,
    #[serde(default = "one")]
    pub rho: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialSection {
    pub name: String,
    pub p_inf: ModelRef,
    pub p_post: ModelRef,
    pub detector: DetectorSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    #[serde(default)]
    pub omegas: Vec<f64>,
    #[serde(default = "default_arl_paths")]
    pub arl_paths: usize,
    #[serde(default = "default_edd_paths")]
    pub edd_paths: usize,
    #[serde(default = "default_cap")]
    pub cap: u64,
    #[serde(default = "default_drift_samples")]
    pub drift_samples: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            omegas: Vec::new(),
            arl_paths: default_arl_paths(),
            edd_paths: default_edd_paths(),
            cap: default_cap(),
            drift_samples: default_drift_samples(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSection {
    pub model: ModelRef,
    pub n: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub models: BTreeMap<String, ScoreModel>,
    /// LfdPair JSON whose members join the model table as `q_inf` and `q_post`.
    #[serde(default)]
    pub lfd_pair: Option<PathBuf>,
    #[serde(default)]
    pub families: Option<Families>,
    #[serde(default)]
    pub lfd: LfdSection,
    #[serde(default)]
    pub calibration: Option<CalibrationSection>,
    #[serde(default)]
    pub detector: Option<DetectorSection>,
    #[serde(default)]
    pub trials: Vec<TrialSection>,
    #[serde(default)]
    pub bench: BenchSection,
    #[serde(default)]
    pub sample: Option<SampleSection>,
}

fn q_inf() -> ModelRef {
    ModelRef::Name("q_inf".into())
}
fn q_post() -> ModelRef {
    ModelRef::Name("q_post".into())
}
fn one() -> f64 {
    1.0
}
fn default_tol() -> f64 {
    0.01
}
fn default_calibration_samples() -> usize {
    1_000_000
}
fn default_drift_samples() -> usize {
    50_000
}
fn default_arl_paths() -> usize {
    2000
}
fn default_edd_paths() -> usize {
    5000
}
fn default_cap() -> u64 {
    100_000
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Input(format!("config: {e}")))?;
        if cfg.version != CONFIG_VERSION {
            return Err(CliError::Input(format!(
                "config: unsupported version {} (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        Ok(cfg)
    }

    /// Reads a config and loads the referenced LFD pair relative to the config file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(rel) = &cfg.lfd_pair {
            let full = path.parent().unwrap_or(Path::new(".")).join(rel);
            cfg.lfd_pair = Some(full);
        }
        cfg.merge_pair()?;
        Ok(cfg)
    }

    fn merge_pair(&mut self) -> Result<(), CliError> {
        let Some(path) = &self.lfd_pair else { return Ok(()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read lfd pair {}: {e}", path.display())))?;
        let pair: LfdPair =
            serde_json::from_str(&text).map_err(|e| CliError::Input(format!("lfd pair {}: {e}", path.display())))?;
        for (name, model) in [("q_inf", pair.q_inf), ("q_post", pair.q_post)] {
            if self.models.contains_key(name) {
                return Err(CliError::Input(format!("model name {name} collides with the lfd pair")));
            }
            self.models.insert(name.to_string(), model);
        }
        Ok(())
    }

    pub fn resolve(&self, r: &ModelRef) -> Result<ScoreModel, CliError> {
        match r {
            ModelRef::Inline(m) => Ok((**m).clone()),
            ModelRef::Name(name) => self
                .models
                .get(name)
                .cloned()
                .ok_or_else(|| CliError::Input(format!("unknown model name '{name}'"))),
        }
    }

    pub fn resolve_family(&self, f: &Family) -> Result<Vec<ScoreModel>, CliError> {
        match f {
            Family::Polytope(p) => Ok(p.vertex_models().into_iter().map(Into::into).collect()),
            Family::Basis(refs) => refs.iter().map(|r| self.resolve(r)).collect(),
        }
    }
}
