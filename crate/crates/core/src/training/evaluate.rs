use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::select_best_mode;
use super::metrics::{compute_metrics, MetricsReport};
use crate::data::Scene;
use crate::dynamics::{DynamicsConfig, HostBehavior};
use crate::error::{Error, Result};
use crate::model::{HostHypothesis, Model, Phase};

/// Label of the constant-velocity baseline block.
pub const BASELINE: &str = "constant_velocity";

/// Metrics for one host behavior model (or the baseline).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorMetrics {
    pub behavior: String,
    pub metrics: MetricsReport,
}

/// Each ambient vehicle continued at the velocity of its last two history
/// frames.
pub fn constant_velocity_prediction(scene: &Scene, vehicle: usize) -> Vec<[f64; 2]> {
    let h = &scene.history[vehicle];
    let (p1, p0) = (h[h.len() - 1], h[h.len() - 2]);
    let d = [p1[0] - p0[0], p1[1] - p0[1]];
    (1..=scene.future_len())
        .map(|k| [p1[0] + k as f64 * d[0], p1[1] + k as f64 * d[1]])
        .collect()
}

type Pairs = (Vec<Vec<[f64; 2]>>, Vec<Vec<[f64; 2]>>);

fn collect_best(
    model: &Model,
    scenes: &[Scene],
    behavior: &dyn HostBehavior,
    dyn_cfg: &DynamicsConfig,
) -> Result<Pairs> {
    let per_scene: Vec<Pairs> = scenes
        .par_iter()
        .map(|scene| -> Result<Pairs> {
            let host = HostHypothesis::from_behavior(scene, behavior, dyn_cfg)?;
            let pred = model.predict(scene, &host, Phase::Eval, true)?;
            let mut truth = Vec::new();
            let mut best = Vec::new();
            for (r, ms) in pred.modes.iter().enumerate() {
                let y = &scene.future[r + 1];
                let k = select_best_mode(y, &ms.trajectories)?;
                truth.push(y.clone());
                best.push(ms.trajectories[k].clone());
            }
            Ok((truth, best))
        })
        .collect::<Result<_>>()?;
    Ok(per_scene
        .into_iter()
        .fold((Vec::new(), Vec::new()), |(mut t, mut p), (a, b)| {
            t.extend(a);
            p.extend(b);
            (t, p)
        }))
}

/// Best-mode metrics for every requested behavior, followed by the
/// constant-velocity baseline.
pub fn evaluate(
    model: &Model,
    scenes: &[Scene],
    behaviors: &[Arc<dyn HostBehavior>],
    dyn_cfg: &DynamicsConfig,
    horizons: &[usize],
) -> Result<Vec<BehaviorMetrics>> {
    if scenes.iter().all(|s| s.num_ambient() == 0) {
        return Err(Error::Contract("evaluation set has no ambient vehicles".into()));
    }
    let mut out = Vec::with_capacity(behaviors.len() + 1);
    for b in behaviors {
        let (truth, best) = collect_best(model, scenes, b.as_ref(), dyn_cfg)?;
        out.push(BehaviorMetrics {
            behavior: b.name().to_string(),
            metrics: compute_metrics(&truth, &best, horizons)?,
        });
    }
    let (mut truth, mut cv) = (Vec::new(), Vec::new());
    for s in scenes {
        for i in 1..s.num_vehicles() {
            truth.push(s.future[i].clone());
            cv.push(constant_velocity_prediction(s, i));
        }
    }
    out.push(BehaviorMetrics {
        behavior: BASELINE.to_string(),
        metrics: compute_metrics(&truth, &cv, horizons)?,
    });
    Ok(out)
}
