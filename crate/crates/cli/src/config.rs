//! Experiment configuration. Every field has a default, so `{}` is a valid
//! configuration file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use offset_risk_core::model::Instance;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::checks::VerifyConfig;
use crate::instances::{truth_ladder, LadderSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Aggregate,
    Complexity,
    Concentration,
    Mirror,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Erm,
    Star,
    Midpoint,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Erm => "erm",
            Estimator::Star => "star",
            Estimator::Midpoint => "midpoint",
        }
    }
}

/// Where the distribution and dictionary come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceSource {
    /// Path to an instance document, relative to the configuration file.
    File(PathBuf),
    /// An instance document embedded in the configuration.
    Inline(serde_json::Value),
    /// The generated truth-plus-ladder instance.
    TruthLadder(LadderSpec),
}

impl Default for InstanceSource {
    fn default() -> Self {
        InstanceSource::TruthLadder(LadderSpec::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AggregateConfig {
    pub estimators: Vec<Estimator>,
    pub c1: f64,
}

impl Default for AggregateConfig {
    fn default() -> Self {
        Self { estimators: vec![Estimator::Erm, Estimator::Star, Estimator::Midpoint], c1: 4.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComplexityConfig {
    pub gamma: f64,
    pub r_tol: f64,
}

impl Default for ComplexityConfig {
    fn default() -> Self {
        Self { gamma: 0.5, r_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConcentrationConfig {
    pub gamma: f64,
    /// Multipliers are `zeta = +-zeta_scale` independent of `X`.
    pub zeta_scale: f64,
    pub n: usize,
    pub lambda_points: usize,
    pub confidence: f64,
    pub deltas: Vec<f64>,
}

impl Default for ConcentrationConfig {
    fn default() -> Self {
        Self { gamma: 0.5, zeta_scale: 1.0, n: 32, lambda_points: 8, confidence: 0.95, deltas: vec![0.1, 0.01] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MirrorChoice {
    Euclidean,
    NegativeEntropy,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MirrorConfig {
    pub map: MirrorChoice,
    pub epsilon: f64,
    pub step: f64,
    pub n: usize,
    /// Starting point; all ones when absent.
    pub w0: Option<Vec<f64>>,
    /// Reference point; all halves when absent.
    pub w_star: Option<Vec<f64>>,
    /// Upper bound on the number of path rows written.
    pub max_rows: usize,
}

impl Default for MirrorConfig {
    fn default() -> Self {
        Self {
            map: MirrorChoice::Both,
            epsilon: 0.01,
            step: 1e-3,
            n: 64,
            w0: None,
            w_star: None,
            max_rows: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Option<Command>,
    pub seed: u64,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub delta: f64,
    pub instance: InstanceSource,
    pub aggregate: AggregateConfig,
    pub complexity: ComplexityConfig,
    pub concentration: ConcentrationConfig,
    pub mirror: MirrorConfig,
    pub verify: VerifyConfig,
    /// Directory that relative instance paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            command: None,
            seed: 0,
            n_grid: vec![64, 128, 256, 512, 1024, 2048, 4096],
            replicates: 1000,
            delta: 0.05,
            instance: InstanceSource::default(),
            aggregate: AggregateConfig::default(),
            complexity: ComplexityConfig::default(),
            concentration: ConcentrationConfig::default(),
            mirror: MirrorConfig::default(),
            verify: VerifyConfig::default(),
            base_dir: PathBuf::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            bail!("n_grid must not be empty");
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) || self.n_grid[0] == 0 {
            bail!("n_grid must be positive and strictly increasing");
        }
        if self.replicates == 0 {
            bail!("replicates must be positive");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            bail!("delta must lie in (0, 1)");
        }
        if let InstanceSource::File(p) = &self.instance {
            let full = self.base_dir.join(p);
            if !full.is_file() {
                bail!("instance file {} does not exist", full.display());
            }
        }
        self.verify.validate()
    }

    pub fn load_instance(&self) -> Result<Instance> {
        Ok(match &self.instance {
            InstanceSource::File(p) => {
                let full = self.base_dir.join(p);
                let text = std::fs::read_to_string(&full).with_context(|| format!("reading {}", full.display()))?;
                Instance::from_json(&text)?
            }
            InstanceSource::Inline(v) => Instance::from_value(v.clone())?,
            InstanceSource::TruthLadder(spec) => truth_ladder(spec)?,
        })
    }

    /// SHA-256 of the canonical JSON form, as lowercase hex.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("configuration serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}
