use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::DEFAULT_TAU;

/// Ablation variants of the predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    #[default]
    None,
    /// Pairwise edges instead of row hyperedges.
    Gnn,
    /// A single mode.
    Deterministic,
    /// Constant-velocity host hypothesis at evaluation.
    Kinematic,
}

impl Ablation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Ablation::None => "none",
            Ablation::Gnn => "gnn",
            Ablation::Deterministic => "deterministic",
            Ablation::Kinematic => "kinematic",
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Ablation::None),
            "gnn" => Ok(Ablation::Gnn),
            "deterministic" => Ok(Ablation::Deterministic),
            "kinematic" => Ok(Ablation::Kinematic),
            other => Err(Error::Config(format!("unknown ablation `{other}`"))),
        }
    }
}

/// Predictor hyperparameters. Stored next to every checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Node and hyperedge feature width.
    pub d_model: usize,
    pub layers: usize,
    pub modes: usize,
    pub tau: f64,
    pub history_len: usize,
    pub future_len: usize,
    /// Positions are divided by this before entering the network (m).
    pub position_scale: f64,
    pub ablation: Ablation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_model: 64,
            layers: 2,
            modes: 5,
            tau: DEFAULT_TAU,
            history_len: 30,
            future_len: 50,
            position_scale: 10.0,
            ablation: Ablation::None,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.modes == 0 {
            return Err(Error::Config("number of modes must be at least 1".into()));
        }
        if self.ablation == Ablation::Deterministic && self.modes != 1 {
            return Err(Error::Config("the deterministic ablation uses exactly one mode".into()));
        }
        if self.d_model == 0 || self.history_len < 3 || self.future_len == 0 {
            return Err(Error::Config(format!(
                "invalid sizes: d_model {}, history {}, future {}",
                self.d_model, self.history_len, self.future_len
            )));
        }
        if !(-1.0..=1.0).contains(&self.tau) {
            return Err(Error::Config(format!("tau must lie in [-1, 1], got {}", self.tau)));
        }
        if !(self.position_scale > 0.0) {
            return Err(Error::Config("position scale must be positive".into()));
        }
        Ok(())
    }

    /// Name of the hyperedge builder this configuration uses.
    pub fn builder_name(&self) -> &'static str {
        match self.ablation {
            Ablation::Gnn => "pairwise",
            _ => "hypergraph",
        }
    }

    /// Applies an ablation, forcing one mode for the deterministic variant.
    pub fn with_ablation(mut self, ablation: Ablation) -> Self {
        self.ablation = ablation;
        if ablation == Ablation::Deterministic {
            self.modes = 1;
        }
        self
    }
}

const SIDECAR_FORMAT: &str = "hfttc-model";
const SIDECAR_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    format: String,
    version: u32,
    config: ModelConfig,
}

/// `<checkpoint>.model.json`
pub fn sidecar_path(checkpoint: &Path) -> PathBuf {
    let mut name = checkpoint.as_os_str().to_owned();
    name.push(".model.json");
    PathBuf::from(name)
}

pub fn save_sidecar(checkpoint: &Path, cfg: &ModelConfig) -> Result<()> {
    let path = sidecar_path(checkpoint);
    let text = serde_json::to_string_pretty(&Sidecar {
        format: SIDECAR_FORMAT.into(),
        version: SIDECAR_VERSION,
        config: cfg.clone(),
    })?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_sidecar(checkpoint: &Path) -> Result<ModelConfig> {
    let path = sidecar_path(checkpoint);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let s: Sidecar = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: malformed model sidecar: {e}", path.display())))?;
    if s.format != SIDECAR_FORMAT || s.version != SIDECAR_VERSION {
        return Err(Error::Config(format!(
            "{}: unsupported sidecar {} v{}",
            path.display(),
            s.format,
            s.version
        )));
    }
    s.config.validate()?;
    Ok(s.config)
}
