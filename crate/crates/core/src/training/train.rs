use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::scene_loss;
use super::optim::{Adam, AdamConfig};
use crate::data::Scene;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::numerics::{GradientMap, Graph};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Weight of the mean-over-modes term.
    pub lambda: f64,
    pub lr: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Weight of the optional cross-entropy term on the best mode; 0 disables it.
    pub ce_weight: f64,
    /// Fill the `wall_ms` column; off keeps logs reproducible.
    pub record_wall_time: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            lr: 1e-3,
            steps: 500,
            batch_size: 16,
            seed: 0,
            ce_weight: 0.0,
            record_wall_time: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(Error::Config(format!("learning rate must be >= 0, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.ce_weight >= 0.0) {
            return Err(Error::Config("cross-entropy weight must be >= 0".into()));
        }
        Ok(())
    }
}

/// One row of the training log. Losses are per ambient vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: usize,
    pub loss: f64,
    pub best_of_m_term: f64,
    pub average_term: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub curve: Vec<LossRecord>,
}

/// Per-scene (loss, best-of-M term, average term, vehicles, gradient).
type SceneGrad = (f64, f64, f64, usize, GradientMap);

/// Mean loss and gradient over a batch of scenes. Scene gradients are
/// computed in parallel and reduced in batch order.
pub fn batch_gradient(
    model: &Model,
    scenes: &[&Scene],
    lambda: f64,
    ce_weight: f64,
) -> Result<(LossRecord, GradientMap)> {
    let per_scene: Vec<Option<SceneGrad>> = scenes
        .par_iter()
        .map(|scene| -> Result<_> {
            let mut g = Graph::new();
            let fwd = model.forward(&mut g, scene, scene.host_future())?;
            let Some(l) = scene_loss(&mut g, &fwd, &scene.future, lambda, ce_weight)? else {
                return Ok(None);
            };
            let total = g.value(l.node).item();
            Ok(Some((total, l.best_of_m, l.average, l.vehicles, g.backward(l.node)?)))
        })
        .collect::<Result<_>>()?;

    let count: usize = per_scene.iter().flatten().map(|s| s.3).sum();
    if count == 0 {
        return Err(Error::Contract("batch has no ambient vehicles".into()));
    }
    let w = 1.0 / count as f64;
    let mut grads = GradientMap::new();
    let (mut loss, mut best, mut avg) = (0.0, 0.0, 0.0);
    for (l, b, a, _, g) in per_scene.into_iter().flatten() {
        loss += l;
        best += b;
        avg += a;
        for (name, t) in g {
            match grads.get_mut(&name) {
                Some(acc) => {
                    for (x, y) in acc.data_mut().iter_mut().zip(t.data()) {
                        *x += y * w;
                    }
                }
                None => {
                    grads.insert(name, t.map(|v| v * w));
                }
            }
        }
    }
    Ok((
        LossRecord {
            step: 0,
            loss: loss * w,
            best_of_m_term: best * w,
            average_term: avg * w,
            wall_ms: 0,
        },
        grads,
    ))
}

/// Mini-batch training with teacher-forced host embeddings. Batches walk
/// through a seeded permutation of the scenes, reshuffled each epoch.
pub fn train(mut model: Model, scenes: &[Scene], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let usable: Vec<&Scene> = scenes.iter().filter(|s| s.num_ambient() > 0).collect();
    if usable.is_empty() {
        return Err(Error::Contract(
            "training set has no scene with ambient vehicles".into(),
        ));
    }
    if cfg.lr == 0.0 {
        log::warn!("learning rate is zero; parameters will not change");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..usable.len()).collect();
    let mut cursor = order.len();
    let batch = cfg.batch_size.min(usable.len());
    let mut opt = Adam::new(AdamConfig {
        lr: cfg.lr,
        ..Default::default()
    });
    let start = Instant::now();
    let mut curve = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        if cursor + batch > order.len() {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let picked: Vec<&Scene> = order[cursor..cursor + batch].iter().map(|&i| usable[i]).collect();
        cursor += batch;
        let (mut rec, grads) = batch_gradient(&model, &picked, cfg.lambda, cfg.ce_weight)?;
        if !rec.loss.is_finite() {
            return Err(Error::Divergence(format!("loss became {} at step {step}", rec.loss)));
        }
        opt.step(model.params_mut(), &grads)?;
        rec.step = step;
        if cfg.record_wall_time {
            rec.wall_ms = start.elapsed().as_millis() as u64;
        }
        log::debug!("step {step}: loss {:.6}", rec.loss);
        curve.push(rec);
    }
    Ok(TrainOutcome { model, curve })
}
