use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::Args;
use hfttc_core::data::{SceneConfig, SplitSpec};
use hfttc_core::dynamics::{BehaviorMode, BehaviorRegistry, HostBehavior};
use hfttc_core::model::{Ablation, ModelConfig};
use hfttc_core::safety::SafetyThresholds;
use hfttc_core::training::TrainConfig;
use hfttc_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// Every run setting, as given on the command line or in a JSON config
/// file. Unset fields fall back to the file, then to defaults.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Trajectory CSV, scenario JSON or scene cache; repeatable.
    #[arg(long, value_name = "PATH")]
    pub data: Vec<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    /// Output directory [env: HFTTC_OUT, default: out]
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,

    /// Topology threshold on cosine affinity.
    #[arg(long, allow_negative_numbers = true)]
    pub tau: Option<f64>,
    /// Number of predicted modes.
    #[arg(long = "modes", value_name = "M")]
    pub modes: Option<usize>,
    #[arg(long)]
    pub d_model: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Weight of the auxiliary cross-entropy term; 0 disables it.
    #[arg(long)]
    pub ce_weight: Option<f64>,

    /// last_step, average, self_prediction, constant_velocity or all.
    #[arg(long)]
    pub behavior: Option<String>,
    /// gnn, deterministic or kinematic.
    #[arg(long)]
    pub ablate: Option<Ablation>,

    /// Longitudinal collision threshold (m).
    #[arg(long)]
    pub rx: Option<f64>,
    /// Lateral collision threshold (m).
    #[arg(long)]
    pub ry: Option<f64>,
    /// TTC search horizon (s).
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Overlay the constant-velocity TTC on risk plots.
    #[arg(long)]
    pub traditional: bool,

    /// Fraction of recordings used for training.
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Split evaluated by `evaluate`: test or all.
    #[arg(long)]
    pub eval_split: Option<EvalSplit>,
    /// Frames between window starts when windowing recordings.
    #[arg(long)]
    pub stride: Option<usize>,
    /// Neighbour radius (m).
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub max_ambient: Option<usize>,
    /// Restrict `safety` to these scene names; repeatable.
    #[arg(long = "scene", value_name = "NAME")]
    pub scenes: Vec<String>,

    /// Recordings generated by `corpus`.
    #[arg(long)]
    pub recordings: Option<usize>,
    /// Length of each generated recording (s).
    #[arg(long)]
    pub duration: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EvalSplit {
    #[default]
    Test,
    All,
}

macro_rules! overlay {
    ($flags:ident, $file:ident; $($opt:ident),*) => {
        $( if $flags.$opt.is_none() { $flags.$opt = $file.$opt; } )*
    };
}

impl Settings {
    /// Reads a JSON config file; unknown keys are rejected.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Command-line values win over the file.
    pub fn over(mut self, file: Settings) -> Self {
        if self.data.is_empty() {
            self.data = file.data;
        }
        if self.scenes.is_empty() {
            self.scenes = file.scenes;
        }
        self.traditional |= file.traditional;
        overlay!(self, file; checkpoint, out, seed, tau, modes, d_model, layers, lambda, lr, steps,
            batch_size, ce_weight, behavior, ablate, rx, ry, horizon, train_fraction, eval_split,
            stride, radius, max_ambient, recordings, duration);
        self
    }
}

/// Validated settings with defaults filled in.
#[derive(Clone)]
pub struct RunConfig {
    pub data: Vec<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub behaviors: Vec<Arc<dyn HostBehavior>>,
    pub thresholds: SafetyThresholds,
    pub traditional: bool,
    pub scene: SceneConfig,
    pub split: SplitSpec,
    pub eval_split: EvalSplit,
    pub scenes: Vec<String>,
    pub recordings: usize,
    pub duration_s: f64,
    /// Model hyperparameters given explicitly; checked against a
    /// checkpoint's sidecar.
    pub explicit: Settings,
}

impl RunConfig {
    pub fn resolve(s: Settings) -> Result<Self> {
        let out = s
            .out
            .clone()
            .or_else(|| std::env::var_os("HFTTC_OUT").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        let seed = s.seed.unwrap_or(0);

        let mut model = ModelConfig::default();
        if let Some(v) = s.tau {
            model.tau = v;
        }
        if let Some(v) = s.modes {
            model.modes = v;
        }
        if let Some(v) = s.d_model {
            model.d_model = v;
        }
        if let Some(v) = s.layers {
            model.layers = v;
        }
        if let Some(a) = s.ablate {
            model = model.with_ablation(a);
            if let (Ablation::Deterministic, Some(m)) = (a, s.modes) {
                if m != 1 {
                    return Err(Error::Config(format!(
                        "--ablate deterministic uses one mode, got --modes {m}"
                    )));
                }
            }
        }
        model.validate()?;

        let d = TrainConfig::default();
        let train = TrainConfig {
            lambda: s.lambda.unwrap_or(d.lambda),
            lr: s.lr.unwrap_or(d.lr),
            steps: s.steps.unwrap_or(d.steps),
            batch_size: s.batch_size.unwrap_or(d.batch_size),
            ce_weight: s.ce_weight.unwrap_or(d.ce_weight),
            seed,
            record_wall_time: false,
        };
        train.validate()?;

        let registry = BehaviorRegistry::builtin();
        let behaviors = match s.behavior.as_deref().unwrap_or("all") {
            "all" => BehaviorMode::ALL
                .iter()
                .map(|m| registry.get(m.as_str()))
                .collect::<Result<Vec<_>>>()?,
            name => vec![registry.get(name).map_err(|e| Error::Config(e.to_string()))?],
        };

        let t = SafetyThresholds::default();
        let thresholds = SafetyThresholds {
            rx: s.rx.unwrap_or(t.rx),
            ry: s.ry.unwrap_or(t.ry),
            horizon: s.horizon.unwrap_or(t.horizon),
            dt: t.dt,
        };
        thresholds.validate()?;

        let sc = SceneConfig::default();
        let scene = SceneConfig {
            history_len: model.history_len,
            future_len: model.future_len,
            stride: s.stride.unwrap_or(sc.stride),
            radius: s.radius.unwrap_or(sc.radius),
            max_ambient: s.max_ambient.unwrap_or(sc.max_ambient),
        };
        scene.validate()?;

        let split = SplitSpec {
            train_fraction: s.train_fraction.unwrap_or(SplitSpec::default().train_fraction),
            seed,
            group_by_recording: true,
        };
        if !(split.train_fraction > 0.0 && split.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train fraction must lie in (0, 1), got {}",
                split.train_fraction
            )));
        }

        let recordings = s.recordings.unwrap_or(6);
        let duration_s = s.duration.unwrap_or(20.0);

        Ok(Self {
            data: s.data.clone(),
            checkpoint: s.checkpoint.clone(),
            out,
            seed,
            model,
            train,
            behaviors,
            thresholds,
            traditional: s.traditional,
            scene,
            split,
            eval_split: s.eval_split.unwrap_or_default(),
            scenes: s.scenes.clone(),
            recordings,
            duration_s,
            explicit: s,
        })
    }

    /// Checkpoint path, defaulting to `<out>/model.ckpt`.
    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint.clone().unwrap_or_else(|| self.out.join("model.ckpt"))
    }

    /// Applies explicit overrides to a checkpoint's stored configuration.
    /// Hyperparameters that shape or define the trained network must agree;
    /// the topology and host-hypothesis ablations may be switched at
    /// evaluation because they reuse the same parameters.
    pub fn reconcile(&self, stored: &ModelConfig) -> Result<ModelConfig> {
        let s = &self.explicit;
        let mismatch = |what: &str, given: String, saved: String| {
            Error::Config(format!("--{what} {given} disagrees with the checkpoint ({saved})"))
        };
        if let Some(v) = s.modes.filter(|v| *v != stored.modes) {
            return Err(mismatch("modes", v.to_string(), stored.modes.to_string()));
        }
        if let Some(v) = s.tau.filter(|v| *v != stored.tau) {
            return Err(mismatch("tau", v.to_string(), stored.tau.to_string()));
        }
        if let Some(v) = s.d_model.filter(|v| *v != stored.d_model) {
            return Err(mismatch("d-model", v.to_string(), stored.d_model.to_string()));
        }
        if let Some(v) = s.layers.filter(|v| *v != stored.layers) {
            return Err(mismatch("layers", v.to_string(), stored.layers.to_string()));
        }
        let mut cfg = stored.clone();
        if let Some(a) = s.ablate {
            if a == Ablation::Deterministic && stored.modes != 1 {
                return Err(mismatch("ablate", a.to_string(), format!("{} modes", stored.modes)));
            }
            cfg.ablation = a;
        }
        Ok(cfg)
    }
}
