use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::Scene;
use crate::dynamics::{DynamicsConfig, HostBehavior};
use crate::error::{Error, Result};

/// Which protocol is driving the host embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Train,
    Eval,
}

/// Where a host trajectory came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HostSource {
    GroundTruth,
    /// Behavior-model rollout, by model name.
    Behavior(String),
}

impl fmt::Display for HostSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HostSource::GroundTruth => f.write_str("ground_truth"),
            HostSource::Behavior(b) => f.write_str(b),
        }
    }
}

/// Host positions over the prediction horizon (frames 1..=T_p after the
/// last observation), tagged with their source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HostHypothesis {
    pub source: HostSource,
    pub positions: Vec<[f64; 2]>,
}

impl HostHypothesis {
    /// Teacher-forcing input: the recorded host future.
    pub fn ground_truth(scene: &Scene) -> Self {
        Self {
            source: HostSource::GroundTruth,
            positions: scene.host_future().to_vec(),
        }
    }

    /// RK4 rollout of a behavior model from the host history.
    pub fn from_behavior(scene: &Scene, behavior: &dyn HostBehavior, cfg: &DynamicsConfig) -> Result<Self> {
        let n = scene.future_len();
        let traj = behavior.hypothesis(scene.host_history(), scene.dt, n, cfg)?;
        Ok(Self {
            source: HostSource::Behavior(behavior.name().to_string()),
            positions: traj.positions()[1..].to_vec(),
        })
    }

    /// In strict mode the phase must match the source: ground truth only
    /// in training, behavior rollouts only in evaluation.
    pub fn check_phase(&self, phase: Phase, strict: bool) -> Result<()> {
        if !strict {
            return Ok(());
        }
        match (phase, &self.source) {
            (Phase::Train, HostSource::GroundTruth) | (Phase::Eval, HostSource::Behavior(_)) => Ok(()),
            (p, s) => Err(Error::Contract(format!(
                "{p:?} phase cannot embed a {s} host trajectory"
            ))),
        }
    }
}
