use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::base::TrainConfig;
use crate::error::{Error, Result};
use crate::graph::TriangleWeight;
use crate::nlcs::{LinearCsParams, NlcsConfig, Teleport};
use crate::propagation::{MixingFunction, PhiMode, PropagationParams, DEFAULT_ITERATIONS};

/// Where base predictions come from.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum BaseModel {
    /// Linear softmax on the spectral embedding.
    #[default]
    Pl,
    /// Three-layer perceptron on node features.
    Mlp,
    /// Dense score matrix from a file.
    File(PathBuf),
}

impl FromStr for BaseModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pl" => Ok(BaseModel::Pl),
            "mlp" => Ok(BaseModel::Mlp),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(BaseModel::File(PathBuf::from(p))),
                _ => Err(Error::param("base", format!("unknown base `{s}` (pl|mlp|file:<path>)"))),
            },
        }
    }
}

impl TryFrom<String> for BaseModel {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<BaseModel> for String {
    fn from(b: BaseModel) -> String {
        b.to_string()
    }
}

impl fmt::Display for BaseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseModel::Pl => f.write_str("pl"),
            BaseModel::Mlp => f.write_str("mlp"),
            BaseModel::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

/// `(alpha, beta)` of a spreading stage plus its teleport target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub teleport: Option<Teleport>,
}

impl StageConfig {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self {
            alpha,
            beta,
            teleport: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearCsConfig {
    pub correction_alpha: f64,
    pub smoothing_alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpConfig {
    pub hidden: usize,
    pub dropout: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: 256,
            dropout: 0.5,
        }
    }
}

/// Value ranges explored by the grid search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        let tenths: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        Self {
            alphas: tenths.clone(),
            betas: tenths,
        }
    }
}

fn default_t() -> usize {
    DEFAULT_ITERATIONS
}

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

fn default_lp() -> StageConfig {
    StageConfig::new(0.9, 0.0)
}

fn default_nhols() -> StageConfig {
    StageConfig::new(0.4, 0.5)
}

fn default_correction() -> StageConfig {
    StageConfig::new(0.4, 0.5)
}

fn default_smoothing() -> StageConfig {
    StageConfig::new(0.4, 0.5)
}

fn default_linear_cs() -> LinearCsConfig {
    LinearCsConfig {
        correction_alpha: 0.8,
        smoothing_alpha: 0.8,
    }
}

/// One experiment: dataset, split ratio, seeds, and all method parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Dataset directory.
    pub dataset: PathBuf,
    /// Fraction of each class used for training.
    pub k: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Iterations of every spreading loop.
    #[serde(default = "default_t")]
    pub t: usize,
    #[serde(default)]
    pub sigma: MixingFunction,
    #[serde(default)]
    pub phi: PhiMode,
    #[serde(default)]
    pub base: BaseModel,
    #[serde(default)]
    pub triangle_weight: TriangleWeight,
    /// Spectral embedding width; `max(2c, 32)` capped at `n - 1` if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_dim: Option<usize>,
    #[serde(default = "default_lp")]
    pub lp: StageConfig,
    #[serde(default = "default_nhols")]
    pub nhols: StageConfig,
    #[serde(default = "default_correction")]
    pub correction: StageConfig,
    #[serde(default = "default_smoothing")]
    pub smoothing: StageConfig,
    #[serde(default = "default_linear_cs")]
    pub linear_cs: LinearCsConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub mlp: MlpConfig,
    #[serde(default)]
    pub grid: GridConfig,
}

impl ExperimentConfig {
    /// Defaults for everything but the dataset and `k`.
    pub fn new(dataset: impl Into<PathBuf>, k: f64) -> Self {
        Self {
            dataset: dataset.into(),
            k,
            seeds: default_seeds(),
            t: default_t(),
            sigma: MixingFunction::default(),
            phi: PhiMode::default(),
            base: BaseModel::default(),
            triangle_weight: TriangleWeight::default(),
            embedding_dim: None,
            lp: default_lp(),
            nhols: default_nhols(),
            correction: default_correction(),
            smoothing: default_smoothing(),
            linear_cs: default_linear_cs(),
            train: TrainConfig::default(),
            mlp: MlpConfig::default(),
            grid: GridConfig::default(),
        }
    }

    /// Parses and validates TOML text. Relative dataset and prediction
    /// paths stay as written.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            cfg.dataset = super::resolve(Some(dir), &cfg.dataset);
            if let BaseModel::File(p) = &cfg.base {
                cfg.base = BaseModel::File(super::resolve(Some(dir), p));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Pretty JSON snapshot stored next to run results.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, e: Error| Error::Config(format!("{name}: {e}"));
        if !(self.k > 0.0 && self.k < 1.0) {
            return Err(Error::Config(format!("k: must lie in (0, 1), got {}", self.k)));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds: at least one seed is required".into()));
        }
        if self.t == 0 {
            return Err(Error::Config("t: must be >= 1".into()));
        }
        if !(self.lp.alpha > 0.0 && self.lp.alpha < 1.0) || self.lp.beta != 0.0 {
            return Err(Error::Config(format!(
                "lp: alpha must lie in (0, 1) and beta must be 0, got ({}, {})",
                self.lp.alpha, self.lp.beta
            )));
        }
        self.nhols_params().map_err(|e| field("nhols", e))?;
        self.nlcs_config().map_err(|e| field("correction/smoothing", e))?;
        self.linear_cs_params().map_err(|e| field("linear_cs", e))?;
        self.train.validate().map_err(|e| field("train", e))?;
        if self.mlp.hidden == 0 || !(0.0..1.0).contains(&self.mlp.dropout) {
            return Err(Error::Config("mlp: hidden must be >= 1 and dropout in [0, 1)".into()));
        }
        if self.embedding_dim == Some(0) {
            return Err(Error::Config("embedding_dim: must be >= 1".into()));
        }
        let in_range = |v: &f64| (0.0..1.0).contains(v);
        if !self.grid.alphas.iter().all(in_range) || !self.grid.betas.iter().all(in_range) {
            return Err(Error::Config("grid: values must lie in [0, 1)".into()));
        }
        Ok(())
    }

    fn stage(&self, name: &str, s: &StageConfig) -> Result<PropagationParams> {
        PropagationParams::new(s.alpha, s.beta)
            .map_err(|e| Error::Config(format!("{name}: {e}")))
            .map(|p| p.with_iterations(self.t).with_phi(self.phi))
    }

    pub fn lp_params(&self) -> Result<PropagationParams> {
        Ok(PropagationParams::linear(self.lp.alpha)?.with_iterations(self.t))
    }

    pub fn nhols_params(&self) -> Result<PropagationParams> {
        self.stage("nhols", &self.nhols)
    }

    pub fn nlcs_config(&self) -> Result<NlcsConfig> {
        let mut cfg = NlcsConfig::new(
            self.stage("correction", &self.correction)?,
            self.stage("smoothing", &self.smoothing)?,
        );
        cfg.sigma = self.sigma;
        if let Some(t) = self.correction.teleport {
            cfg.residual_teleport = t;
        }
        if let Some(t) = self.smoothing.teleport {
            cfg.smoothing_teleport = t;
        }
        Ok(cfg)
    }

    pub fn linear_cs_params(&self) -> Result<LinearCsParams> {
        Ok(LinearCsParams::new(self.linear_cs.correction_alpha, self.linear_cs.smoothing_alpha)?
            .with_iterations(self.t))
    }
}
