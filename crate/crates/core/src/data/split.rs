use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scene::Scene;
use crate::error::{Error, Result};

/// Train/test partition policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    /// Keep every recording entirely on one side.
    pub group_by_recording: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.7,
            seed: 0,
            group_by_recording: true,
        }
    }
}

fn train_count(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1))
}

/// Deterministic shuffle-and-cut. Scenes keep their input order within each
/// side. With grouping on and fewer than two recordings, falls back to a
/// scene-level split and logs a warning.
pub fn split(scenes: Vec<Scene>, spec: &SplitSpec) -> Result<(Vec<Scene>, Vec<Scene>)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction must lie in (0, 1), got {}",
            spec.train_fraction
        )));
    }
    if scenes.is_empty() {
        return Err(Error::Contract("cannot split an empty scene set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let recordings: BTreeSet<&str> = scenes.iter().map(|s| s.recording.as_str()).collect();

    let in_train: Vec<bool> = if spec.group_by_recording && recordings.len() >= 2 {
        let mut names: Vec<&str> = recordings.into_iter().collect();
        names.shuffle(&mut rng);
        let k = train_count(names.len(), spec.train_fraction);
        let side: BTreeMap<&str, bool> = names.iter().enumerate().map(|(i, n)| (*n, i < k)).collect();
        scenes.iter().map(|s| side[s.recording.as_str()]).collect()
    } else {
        if spec.group_by_recording {
            log::warn!("fewer than two recordings; splitting at scene level");
        }
        let mut order: Vec<usize> = (0..scenes.len()).collect();
        order.shuffle(&mut rng);
        let k = train_count(scenes.len(), spec.train_fraction);
        let mut flags = vec![false; scenes.len()];
        for &i in &order[..k] {
            flags[i] = true;
        }
        flags
    };

    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (scene, t) in scenes.into_iter().zip(in_train) {
        if t {
            train.push(scene);
        } else {
            test.push(scene);
        }
    }
    Ok((train, test))
}
