use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::distribution::TtcDistribution;
use super::ttc::{extend_positions, traditional_ttc, ttc_distribution, SafetyThresholds};
use crate::data::Scene;
use crate::dynamics::{DynamicsConfig, HostBehavior};
use crate::error::{Error, Result};
use crate::model::{HostHypothesis, HostSource, ModeSet, Model, Phase};
use crate::training::constant_velocity_prediction;

/// Where ambient futures come from.
#[derive(Debug, Clone, Copy)]
pub enum ModeSource<'a> {
    Model(&'a Model),
    /// The recorded future as a single certain mode.
    GroundTruth,
    /// Constant velocity from the last two history frames, single mode.
    ConstantVelocity,
}

impl ModeSource<'_> {
    pub fn label(&self) -> &'static str {
        match self {
            ModeSource::Model(_) => "model",
            ModeSource::GroundTruth => "ground_truth",
            ModeSource::ConstantVelocity => "constant_velocity",
        }
    }
}

/// Risk of one host/ambient pair under one host behavior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRisk {
    pub pair: [u64; 2],
    pub behavior: String,
    /// `[t, p]`, t in seconds after the prediction instant.
    pub ttc_atoms: Vec<[f64; 2]>,
    pub no_event_mass: f64,
    /// `[1/t, p]`.
    pub ittc_atoms: Vec<[f64; 2]>,
    pub traditional_ttc: Option<f64>,
}

impl PairRisk {
    pub fn ttc(&self) -> TtcDistribution {
        TtcDistribution {
            atoms: self.ttc_atoms.iter().map(|a| (a[0], a[1])).collect(),
            no_event_mass: self.no_event_mass,
        }
    }

    pub fn ittc(&self) -> TtcDistribution {
        TtcDistribution {
            atoms: self.ittc_atoms.iter().map(|a| (a[0], a[1])).collect(),
            no_event_mass: self.no_event_mass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub scene: String,
    /// Source of the ambient futures.
    pub predictor: String,
    pub thresholds: SafetyThresholds,
    pub pairs: Vec<PairRisk>,
}

fn mode_sets(scene: &Scene, source: ModeSource<'_>, host: &HostHypothesis) -> Result<Vec<ModeSet>> {
    Ok(match source {
        ModeSource::Model(m) => m.predict(scene, host, Phase::Eval, true)?.modes,
        ModeSource::GroundTruth => (1..scene.num_vehicles())
            .map(|i| ModeSet {
                vehicle_id: scene.vehicle_ids[i],
                trajectories: vec![scene.future[i].clone()],
                probabilities: vec![1.0],
            })
            .collect(),
        ModeSource::ConstantVelocity => (1..scene.num_vehicles())
            .map(|i| ModeSet {
                vehicle_id: scene.vehicle_ids[i],
                trajectories: vec![constant_velocity_prediction(scene, i)],
                probabilities: vec![1.0],
            })
            .collect(),
    })
}

fn last_two(rows: &[[f64; 2]]) -> [[f64; 2]; 2] {
    [rows[rows.len() - 2], rows[rows.len() - 1]]
}

/// HF-TTC / HF-ITTC for every ambient vehicle under every host behavior,
/// plus the traditional TTC per pair. Pairs are ordered by behavior, then
/// by ambient row.
pub fn scenario_risk(
    scene: &Scene,
    source: ModeSource<'_>,
    behaviors: &[Arc<dyn HostBehavior>],
    thr: &SafetyThresholds,
    dyn_cfg: &DynamicsConfig,
) -> Result<RiskReport> {
    thr.validate()?;
    if (scene.dt - thr.dt).abs() > 1e-9 * thr.dt {
        return Err(Error::Contract(format!(
            "scene sampled at {} s, analysis clock is {} s",
            scene.dt, thr.dt
        )));
    }
    let steps = thr.steps();
    let tp = scene.future_len();
    if steps < tp {
        return Err(Error::Config(format!(
            "search horizon {} s is shorter than the prediction horizon {} s",
            thr.horizon,
            tp as f64 * thr.dt
        )));
    }
    let traditional: Vec<Option<f64>> = (1..scene.num_vehicles())
        .map(|i| traditional_ttc(last_two(scene.host_history()), last_two(&scene.history[i]), thr))
        .collect();

    let mut pairs = Vec::new();
    for b in behaviors {
        let host_traj = b.hypothesis(scene.host_history(), scene.dt, steps, dyn_cfg)?;
        let host = HostHypothesis {
            source: HostSource::Behavior(b.name().to_string()),
            positions: host_traj.positions()[1..=tp].to_vec(),
        };
        let sets = mode_sets(scene, source, &host)?;
        let rows: Vec<PairRisk> = sets
            .par_iter()
            .enumerate()
            .map(|(r, ms)| -> Result<PairRisk> {
                let anchor = scene.last_position(r + 1);
                let trajs = ms
                    .trajectories
                    .iter()
                    .map(|t| {
                        let pts: Vec<[f64; 2]> = std::iter::once(anchor).chain(t.iter().copied()).collect();
                        extend_positions(&pts, scene.dt, steps, dyn_cfg)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let (ttc, ittc) = ttc_distribution(&host_traj, &trajs, &ms.probabilities, thr)?;
                Ok(PairRisk {
                    pair: [scene.host_id(), ms.vehicle_id],
                    behavior: b.name().to_string(),
                    ttc_atoms: ttc.atoms.iter().map(|&(t, p)| [t, p]).collect(),
                    no_event_mass: ttc.no_event_mass,
                    ittc_atoms: ittc.atoms.iter().map(|&(t, p)| [t, p]).collect(),
                    traditional_ttc: traditional[r],
                })
            })
            .collect::<Result<_>>()?;
        pairs.extend(rows);
    }
    Ok(RiskReport {
        scene: scene.name.clone(),
        predictor: source.label().to_string(),
        thresholds: *thr,
        pairs,
    })
}

/// `t,F` rows of a CDF on the analysis grid.
pub fn write_cdf_csv(path: &Path, dist: &TtcDistribution, thr: &SafetyThresholds) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::data(path, e.to_string()))?;
    w.write_record(["t", "F"])
        .map_err(|e| Error::data(path, e.to_string()))?;
    for (t, f) in dist.cdf_grid(thr.dt, thr.steps()) {
        w.write_record([format!("{t:.3}"), format!("{f}")])
            .map_err(|e| Error::data(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
