use std::path::Path;

use hfttc_core::data::{
    build_scenes, load_scene_cache, load_trajectories, simulate, ScenarioSpec, Scene, SceneConfig, TrajectoryFormat,
};
use hfttc_core::{Error, Result};

/// Scenes from every data source, in argument order.
///
/// `.csv` files are trajectory recordings and get windowed; `.json` files
/// are scenario specs and contribute their snapshots; anything else is read
/// as a scene cache.
pub fn load_scenes(paths: &[impl AsRef<Path>], cfg: &SceneConfig) -> Result<Vec<Scene>> {
    if paths.is_empty() {
        return Err(Error::Config("no --data given".into()));
    }
    let mut recordings = Vec::new();
    let mut scenes = Vec::new();
    for p in paths {
        let p = p.as_ref();
        match p.extension().and_then(|e| e.to_str()) {
            Some("csv") => recordings.push(load_trajectories(p, TrajectoryFormat::GenericCsv)?),
            Some("json") => scenes.extend(load_scenario(p)?.1),
            _ => scenes.extend(load_scene_cache(p)?),
        }
    }
    if !recordings.is_empty() {
        let build = build_scenes(&recordings, cfg)?;
        log::info!(
            "{} recordings -> {} scenes ({} windows skipped)",
            recordings.len(),
            build.scenes.len(),
            build.skipped
        );
        scenes.extend(build.scenes);
    }
    if scenes.is_empty() {
        return Err(Error::Data {
            path: paths[0].as_ref().to_path_buf(),
            message: "no complete scene window in the data".into(),
        });
    }
    Ok(scenes)
}

/// Parses and simulates a scenario spec, returning its snapshots.
pub fn load_scenario(path: &Path) -> Result<(hfttc_core::data::SynthOutput, Vec<Scene>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Data {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let spec = ScenarioSpec::from_json(&text)?;
    let sim = simulate(&spec)?;
    let scenes = sim.snapshots()?;
    Ok((sim, scenes))
}
