//! Host behavior models: rules that turn the host's observed history into a
//! control sequence for the prediction horizon.
//!
//! Each model implements [`HostBehavior`] and is looked up by name through a
//! [`BehaviorRegistry`], so the evaluation and safety pipelines can be driven
//! from configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::estimate::{estimate_controls, ControlEstimate};
use super::integrate::{rk4_step, rollout};
use super::state::{ControlInput, DynamicsConfig, GradientProfile, Trajectory};
use crate::error::{Error, Result};

/// A rule producing host control inputs over the prediction horizon.
pub trait HostBehavior: Send + Sync {
    fn name(&self) -> &'static str;

    /// `n` controls for the steps following the last history frame.
    fn controls(&self, history: &[[f64; 2]], dt: f64, n: usize, cfg: &DynamicsConfig) -> Result<Vec<ControlInput>>;

    /// Candidate host trajectory: `n + 1` states starting at the last
    /// observed frame.
    fn hypothesis(&self, history: &[[f64; 2]], dt: f64, n: usize, cfg: &DynamicsConfig) -> Result<Trajectory> {
        let controls = self.controls(history, dt, n, cfg)?;
        let start = estimate_controls(history, dt, cfg)?.final_state();
        rollout(start, &controls, &GradientProfile::Flat, dt, n, cfg)
    }
}

/// Holds the most recently estimated `(a, yaw rate)`.
#[derive(Debug, Default, Clone, Copy)]
pub struct LastStepConstant;

impl HostBehavior for LastStepConstant {
    fn name(&self) -> &'static str {
        "last_step"
    }

    fn controls(&self, history: &[[f64; 2]], dt: f64, n: usize, cfg: &DynamicsConfig) -> Result<Vec<ControlInput>> {
        let u = estimate_controls(history, dt, cfg)?.final_control();
        Ok(vec![u; n])
    }
}

/// Holds the mean `(a, yaw rate)` over the history window.
#[derive(Debug, Default, Clone, Copy)]
pub struct AverageConstant;

impl HostBehavior for AverageConstant {
    fn name(&self) -> &'static str {
        "average"
    }

    fn controls(&self, history: &[[f64; 2]], dt: f64, n: usize, cfg: &DynamicsConfig) -> Result<Vec<ControlInput>> {
        let u = estimate_controls(history, dt, cfg)?.mean_control();
        Ok(vec![u; n])
    }
}

/// Replans every step: the control is re-estimated as the window mean over
/// the trailing history-length frames of observed plus self-generated
/// positions, and one RK4 step is taken with it.
#[derive(Debug, Default, Clone, Copy)]
pub struct SelfPrediction;

impl HostBehavior for SelfPrediction {
    fn name(&self) -> &'static str {
        "self_prediction"
    }

    fn controls(&self, history: &[[f64; 2]], dt: f64, n: usize, cfg: &DynamicsConfig) -> Result<Vec<ControlInput>> {
        let window = history.len();
        let first = estimate_controls(history, dt, cfg)?;
        let mut state = first.final_state();
        let mut track = history.to_vec();
        let mut out = Vec::with_capacity(n);
        let mut est: ControlEstimate = first;
        for k in 0..n {
            let u = est.mean_control();
            out.push(u);
            state = rk4_step(&state, k as f64 * dt, dt, |_| u, &GradientProfile::Flat, cfg).state;
            track.push(state.position());
            if k + 1 < n {
                est = estimate_controls(&track[track.len() - window..], dt, cfg)?;
            }
        }
        Ok(out)
    }
}

/// Constant speed and heading: zero control.
#[derive(Debug, Default, Clone, Copy)]
pub struct ConstantVelocity;

impl HostBehavior for ConstantVelocity {
    fn name(&self) -> &'static str {
        "constant_velocity"
    }

    fn controls(&self, history: &[[f64; 2]], _dt: f64, n: usize, _cfg: &DynamicsConfig) -> Result<Vec<ControlInput>> {
        if history.len() < 3 {
            return Err(Error::Contract("behavior models need at least 3 history frames".into()));
        }
        Ok(vec![ControlInput::ZERO; n])
    }
}

/// The three data-driven behavior models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorMode {
    LastStep,
    Average,
    SelfPrediction,
}

impl BehaviorMode {
    pub const ALL: [BehaviorMode; 3] = [
        BehaviorMode::LastStep,
        BehaviorMode::Average,
        BehaviorMode::SelfPrediction,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            BehaviorMode::LastStep => "last_step",
            BehaviorMode::Average => "average",
            BehaviorMode::SelfPrediction => "self_prediction",
        }
    }
}

impl fmt::Display for BehaviorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BehaviorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "last_step" => Ok(BehaviorMode::LastStep),
            "average" => Ok(BehaviorMode::Average),
            "self_prediction" => Ok(BehaviorMode::SelfPrediction),
            other => Err(Error::Contract(format!("unknown behavior mode `{other}`"))),
        }
    }
}

/// Control sequence for the given behavior mode.
pub fn behavior_controls(
    history: &[[f64; 2]],
    dt: f64,
    mode: BehaviorMode,
    n: usize,
    cfg: &DynamicsConfig,
) -> Result<Vec<ControlInput>> {
    BehaviorRegistry::builtin()
        .get(mode.as_str())?
        .controls(history, dt, n, cfg)
}

/// Behavior models by name.
#[derive(Clone)]
pub struct BehaviorRegistry {
    entries: BTreeMap<&'static str, Arc<dyn HostBehavior>>,
}

impl BehaviorRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    /// Registry with every built-in model.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(LastStepConstant));
        r.register(Arc::new(AverageConstant));
        r.register(Arc::new(SelfPrediction));
        r.register(Arc::new(ConstantVelocity));
        r
    }

    pub fn register(&mut self, behavior: Arc<dyn HostBehavior>) {
        self.entries.insert(behavior.name(), behavior);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn HostBehavior>> {
        self.entries.get(name).cloned().ok_or_else(|| {
            Error::Contract(format!(
                "unknown behavior `{name}`; known: {}",
                self.names().collect::<Vec<_>>().join(", ")
            ))
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }
}

impl fmt::Debug for BehaviorRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}
