use std::path::{Path, PathBuf};

use hfttc_core::data::{generate_corpus, save_scene_cache, split, write_trajectories, CorpusSpec, Scene};
use hfttc_core::dynamics::DynamicsConfig;
use hfttc_core::model::{load_sidecar, Model, ModelConfig};
use hfttc_core::safety::{scenario_risk, write_cdf_csv, ModeSource, RiskReport, SafetyThresholds};
use hfttc_core::training::{evaluate, train, BehaviorMetrics, TrainConfig, DEFAULT_HORIZONS};
use hfttc_core::{Error, Result};
use serde::Serialize;

use crate::config::{EvalSplit, RunConfig};
use crate::data::{load_scenario, load_scenes};
use crate::plot::risk_svg;

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Data {
        path: dir.to_path_buf(),
        message: format!("cannot create output directory: {e}"),
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::Data {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn csv_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Data {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| csv_err(path, e))
}

/// Loads a checkpoint and reconciles it with the command line.
fn load_model(cfg: &RunConfig) -> Result<Model> {
    let ckpt = cfg.checkpoint_path();
    if !ckpt.exists() {
        return Err(Error::Data {
            path: ckpt,
            message: "checkpoint not found".into(),
        });
    }
    let stored = load_sidecar(&ckpt)?;
    let wanted = cfg.reconcile(&stored)?;
    let mut model = Model::load(&ckpt, Some(&stored))?;
    if wanted != stored {
        model = Model::from_parts(wanted, model.params().clone())?;
    }
    Ok(model)
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    model: &'a ModelConfig,
    train: &'a TrainConfig,
    train_scenes: Vec<&'a str>,
    held_out_scenes: usize,
    initial_loss: f64,
    final_loss: f64,
}

pub fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let scenes = load_scenes(&cfg.data, &cfg.scene)?;
    let (train_set, test_set) = split(scenes, &cfg.split)?;
    log::info!("training on {} scenes, {} held out", train_set.len(), test_set.len());
    create_dir(&cfg.out)?;

    let model = Model::new(cfg.model.clone(), cfg.seed)?;
    let outcome = train(model, &train_set, &cfg.train)?;

    let ckpt = cfg.checkpoint_path();
    if let Some(parent) = ckpt.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    outcome.model.save(&ckpt)?;
    write_csv(&cfg.out.join("loss.csv"), &outcome.curve)?;
    write_json(
        &cfg.out.join("train_summary.json"),
        &TrainSummary {
            model: outcome.model.config(),
            train: &cfg.train,
            train_scenes: train_set.iter().map(|s| s.name.as_str()).collect(),
            held_out_scenes: test_set.len(),
            initial_loss: outcome.curve.first().map_or(f64::NAN, |r| r.loss),
            final_loss: outcome.curve.last().map_or(f64::NAN, |r| r.loss),
        },
    )?;
    log::info!("checkpoint written to {}", ckpt.display());
    Ok(())
}

#[derive(Serialize)]
struct MetricsFile<'a> {
    model: &'a ModelConfig,
    split: EvalSplit,
    scenes: usize,
    results: &'a [BehaviorMetrics],
}

#[derive(Serialize)]
struct RmseRow {
    behavior: String,
    ade: f64,
    fde: f64,
    mae: f64,
    rmse: f64,
    rmse_f10: f64,
    rmse_f20: f64,
    rmse_f30: f64,
    rmse_f40: f64,
    rmse_f50: f64,
}

pub fn cmd_evaluate(cfg: &RunConfig) -> Result<()> {
    let model = load_model(cfg)?;
    let scenes = load_scenes(&cfg.data, &cfg.scene)?;
    let scenes = match cfg.eval_split {
        EvalSplit::All => scenes,
        EvalSplit::Test => {
            let (_, test) = split(scenes, &cfg.split)?;
            if test.is_empty() {
                return Err(Error::Config(
                    "the held-out split is empty; use --eval-split all to score the training scenes".into(),
                ));
            }
            test
        }
    };
    let results = evaluate(
        &model,
        &scenes,
        &cfg.behaviors,
        &DynamicsConfig::default(),
        &DEFAULT_HORIZONS,
    )?;
    create_dir(&cfg.out)?;
    write_json(
        &cfg.out.join("metrics.json"),
        &MetricsFile {
            model: model.config(),
            split: cfg.eval_split,
            scenes: scenes.len(),
            results: &results,
        },
    )?;
    let rows: Vec<RmseRow> = results
        .iter()
        .map(|b| {
            let at = |f: usize| {
                b.metrics
                    .rmse_by_horizon
                    .iter()
                    .find(|h| h.frame == f)
                    .map_or(f64::NAN, |h| h.rmse)
            };
            RmseRow {
                behavior: b.behavior.clone(),
                ade: b.metrics.ade,
                fde: b.metrics.fde,
                mae: b.metrics.mae,
                rmse: b.metrics.rmse,
                rmse_f10: at(10),
                rmse_f20: at(20),
                rmse_f30: at(30),
                rmse_f40: at(40),
                rmse_f50: at(50),
            }
        })
        .collect();
    write_csv(&cfg.out.join("rmse_table.csv"), &rows)?;
    for r in &rows {
        log::info!(
            "{:<18} ADE {:.3}  FDE {:.3}  RMSE@50 {:.3}",
            r.behavior,
            r.ade,
            r.fde,
            r.rmse_f50
        );
    }
    Ok(())
}

/// File stem for one pair under one behavior.
pub fn artifact_stem(scene: &str, pair: [u64; 2], behavior: &str) -> String {
    format!("{scene}_{}-{}_{behavior}", pair[0], pair[1])
}

/// Risk analysis of every scene plus per-pair plots and CDF tables.
fn analyse(cfg: &RunConfig, scenes: &[Scene], source: ModeSource<'_>) -> Result<Vec<RiskReport>> {
    let thr: &SafetyThresholds = &cfg.thresholds;
    let dyn_cfg = DynamicsConfig::default();
    let mut reports = Vec::with_capacity(scenes.len());
    for scene in scenes {
        let report = scenario_risk(scene, source, &cfg.behaviors, thr, &dyn_cfg)?;
        for pair in &report.pairs {
            let stem = artifact_stem(&scene.name, pair.pair, &pair.behavior);
            let dist = pair.ttc();
            write_cdf_csv(&cfg.out.join(format!("{stem}.csv")), &dist, thr)?;
            let title = format!(
                "{}: host {} vs {} ({})",
                scene.name, pair.pair[0], pair.pair[1], pair.behavior
            );
            let overlay = cfg.traditional.then_some(pair.traditional_ttc);
            risk_svg(&cfg.out.join(format!("{stem}.svg")), &title, &dist, overlay, thr)?;
        }
        log::info!("{}: {} pair distributions", scene.name, report.pairs.len());
        reports.push(report);
    }
    write_json(&cfg.out.join("risk_report.json"), &reports)?;
    Ok(reports)
}

pub fn cmd_safety(cfg: &RunConfig) -> Result<()> {
    let model = load_model(cfg)?;
    let mut scenes = load_scenes(&cfg.data, &cfg.scene)?;
    if !cfg.scenes.is_empty() {
        scenes.retain(|s| cfg.scenes.contains(&s.name));
        if scenes.is_empty() {
            return Err(Error::Config(format!("no scene named {:?} in the data", cfg.scenes)));
        }
    }
    create_dir(&cfg.out)?;
    analyse(cfg, &scenes, ModeSource::Model(&model))?;
    Ok(())
}

pub fn cmd_scenario(cfg: &RunConfig, spec: &Path) -> Result<()> {
    let (sim, scenes) = load_scenario(spec)?;
    create_dir(&cfg.out)?;
    let name = &sim.spec.name;
    let rec = sim.recording();
    write_trajectories(&cfg.out.join(format!("{name}.csv")), &rec.records)?;
    save_scene_cache(&cfg.out.join(format!("{name}.hfscene")), &scenes)?;

    let model = match &cfg.checkpoint {
        Some(_) => Some(load_model(cfg)?),
        None => {
            log::info!("no checkpoint given; ambient futures are the scripted ground truth");
            None
        }
    };
    let source = model.as_ref().map_or(ModeSource::GroundTruth, ModeSource::Model);
    analyse(cfg, &scenes, source)?;
    Ok(())
}

#[derive(Serialize)]
struct CorpusManifest<'a> {
    spec: &'a CorpusSpec,
    recordings: Vec<PathBuf>,
}

pub fn cmd_corpus(cfg: &RunConfig) -> Result<()> {
    let spec = CorpusSpec {
        recordings: cfg.recordings,
        duration_s: cfg.duration_s,
        seed: cfg.seed,
    };
    let recs = generate_corpus(&spec)?;
    create_dir(&cfg.out)?;
    let mut files = Vec::with_capacity(recs.len());
    for r in &recs {
        let file = PathBuf::from(format!("{}.csv", r.name));
        write_trajectories(&cfg.out.join(&file), &r.records)?;
        files.push(file);
    }
    write_json(
        &cfg.out.join("corpus.json"),
        &CorpusManifest {
            spec: &spec,
            recordings: files,
        },
    )?;
    log::info!("{} recordings written to {}", recs.len(), cfg.out.display());
    Ok(())
}
