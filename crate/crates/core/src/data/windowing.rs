use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::records::Recording;
use super::scene::{NormalizationFrame, Scene};
use crate::dynamics::{estimate_controls, DynamicsConfig};
use crate::error::{Error, Result};

/// Windowing and neighbour-selection policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub history_len: usize,
    pub future_len: usize,
    /// Frames between consecutive window starts for one host.
    pub stride: usize,
    /// m
    pub radius: f64,
    pub max_ambient: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            history_len: 30,
            future_len: 50,
            stride: 10,
            radius: 50.0,
            max_ambient: 8,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.history_len < 3 || self.future_len < 1 || self.stride < 1 || !(self.radius > 0.0) {
            return Err(Error::Config(format!("invalid scene configuration {self:?}")));
        }
        Ok(())
    }
}

/// Scenes built from one or more recordings plus the number of candidate
/// windows that failed the constraints.
#[derive(Debug, Clone, Default)]
pub struct SceneBuild {
    pub scenes: Vec<Scene>,
    pub skipped: usize,
}

type Track = BTreeMap<i64, [f64; 2]>;

/// Sliding-window scene extraction.
///
/// Every vehicle with `history_len + future_len` consecutive frames becomes
/// a host candidate. Ambient vehicles must be observed over the whole window
/// and lie within `radius` of the host at its last history frame; the
/// nearest `max_ambient` are kept. Coordinates are moved into the host frame.
pub fn build_scenes(recordings: &[Recording], cfg: &SceneConfig) -> Result<SceneBuild> {
    cfg.validate()?;
    let mut out = SceneBuild::default();
    for rec in recordings {
        let tracks: BTreeMap<u64, Track> = rec
            .by_vehicle()
            .into_iter()
            .map(|(id, rows)| (id, rows.iter().map(|r| (r.frame, [r.x, r.y])).collect()))
            .collect();
        let hosts: Vec<u64> = tracks.keys().copied().collect();
        let per_host: Vec<(Vec<Scene>, usize)> = hosts
            .par_iter()
            .map(|&host| scenes_for_host(rec, &tracks, host, cfg))
            .collect::<Result<_>>()?;
        for (scenes, skipped) in per_host {
            out.scenes.extend(scenes);
            out.skipped += skipped;
        }
    }
    Ok(out)
}

fn covers(track: &Track, start: i64, len: usize) -> bool {
    (start..start + len as i64).all(|f| track.contains_key(&f))
}

fn scenes_for_host(
    rec: &Recording,
    tracks: &BTreeMap<u64, Track>,
    host: u64,
    cfg: &SceneConfig,
) -> Result<(Vec<Scene>, usize)> {
    let track = &tracks[&host];
    let span = cfg.history_len + cfg.future_len;
    let (Some(&first), Some(&last)) = (track.keys().next(), track.keys().next_back()) else {
        return Ok((Vec::new(), 0));
    };
    let mut scenes = Vec::new();
    let mut skipped = 0;
    let mut start = first;
    while start + span as i64 - 1 <= last {
        if !covers(track, start, span) {
            skipped += 1;
            start += cfg.stride as i64;
            continue;
        }
        scenes.push(make_scene(rec, tracks, host, start, cfg)?);
        start += cfg.stride as i64;
    }
    Ok((scenes, skipped))
}

fn make_scene(
    rec: &Recording,
    tracks: &BTreeMap<u64, Track>,
    host: u64,
    start: i64,
    cfg: &SceneConfig,
) -> Result<Scene> {
    let span = cfg.history_len + cfg.future_len;
    let anchor = start + cfg.history_len as i64 - 1;
    let host_pos = tracks[&host][&anchor];

    let mut ambient: Vec<(f64, u64)> = tracks
        .iter()
        .filter(|(&id, t)| id != host && covers(t, start, span))
        .map(|(&id, t)| {
            let p = t[&anchor];
            ((p[0] - host_pos[0]).hypot(p[1] - host_pos[1]), id)
        })
        .filter(|(d, _)| *d <= cfg.radius)
        .collect();
    ambient.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    ambient.truncate(cfg.max_ambient);

    let ids: Vec<u64> = std::iter::once(host).chain(ambient.iter().map(|a| a.1)).collect();
    let raw = |id: u64, from: i64, len: usize| -> Vec<[f64; 2]> {
        (from..from + len as i64).map(|f| tracks[&id][&f]).collect()
    };
    let host_hist = raw(host, start, cfg.history_len);
    let est = estimate_controls(&host_hist, rec.dt, &DynamicsConfig::default())?;
    let frame = NormalizationFrame {
        origin: host_pos,
        rotation: if est.degenerate { 0.0 } else { est.final_state().heading },
    };
    let local = |pts: Vec<[f64; 2]>| pts.into_iter().map(|p| frame.to_local(p)).collect::<Vec<_>>();

    Ok(Scene {
        name: format!("{}_v{}_f{}", rec.name, host, start),
        recording: rec.name.clone(),
        vehicle_ids: ids.clone(),
        dt: rec.dt,
        start_frame: start,
        history: ids.iter().map(|&id| local(raw(id, start, cfg.history_len))).collect(),
        future: ids
            .iter()
            .map(|&id| local(raw(id, anchor + 1, cfg.future_len)))
            .collect(),
        frame,
    })
}

/// Reverses the host-frame normalization of a scene position.
pub fn denormalize(scene: &Scene, p: [f64; 2]) -> [f64; 2] {
    scene.frame.to_raw(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::records::TrajectoryRecord;

    fn recording(vehicles: &[(u64, f64, f64, f64)], frames: i64) -> Recording {
        // (id, x0, y0, speed) moving along +x at 10 Hz
        let records = vehicles
            .iter()
            .flat_map(|&(id, x0, y0, v)| {
                (0..frames).map(move |f| TrajectoryRecord {
                    vehicle_id: id,
                    frame: f,
                    t: f as f64 * 0.1,
                    x: x0 + v * 0.1 * f as f64,
                    y: y0,
                    lane: None,
                })
            })
            .collect();
        Recording {
            name: "rec".into(),
            dt: 0.1,
            records,
        }
    }

    #[test]
    fn isolated_vehicle_has_empty_ambient_set() {
        let build = build_scenes(&[recording(&[(1, 0.0, 0.0, 20.0)], 120)], &SceneConfig::default()).unwrap();
        assert!(!build.scenes.is_empty());
        assert!(build.scenes.iter().all(|s| s.num_ambient() == 0));
    }

    #[test]
    fn host_ends_history_at_origin() {
        let build = build_scenes(
            &[recording(&[(1, 0.0, 0.0, 20.0), (2, 15.0, 3.5, 22.0)], 100)],
            &SceneConfig::default(),
        )
        .unwrap();
        for s in &build.scenes {
            assert_eq!(s.last_position(0), [0.0, 0.0]);
            assert_eq!(s.history_len(), 30);
            assert_eq!(s.future_len(), 50);
            for (h, f) in s.history.iter().zip(&s.future) {
                // future starts strictly after the history
                assert!(f[0][0] > h[h.len() - 1][0]);
            }
        }
    }

    #[test]
    fn nearest_eight_neighbours_kept() {
        let mut vs = vec![(0, 0.0, 0.0, 20.0)];
        for k in 1..=10u64 {
            vs.push((k, 4.0 * k as f64, if k % 2 == 0 { 3.5 } else { -3.5 }, 20.0));
        }
        let build = build_scenes(&[recording(&vs, 80)], &SceneConfig::default()).unwrap();
        let s = build.scenes.iter().find(|s| s.host_id() == 0).unwrap();
        assert_eq!(s.num_ambient(), 8);
        assert_eq!(s.ambient_ids(), &[1, 2, 3, 4, 5, 6, 7, 8]);
    }

    #[test]
    fn partially_observed_vehicles_are_dropped() {
        let mut rec = recording(&[(1, 0.0, 0.0, 20.0), (2, 10.0, 0.0, 20.0)], 80);
        rec.records.retain(|r| !(r.vehicle_id == 2 && r.frame == 5));
        let build = build_scenes(&[rec], &SceneConfig::default()).unwrap();
        let s = build
            .scenes
            .iter()
            .find(|s| s.host_id() == 1 && s.start_frame == 0)
            .unwrap();
        assert_eq!(s.num_ambient(), 0);
        assert!(build.skipped > 0);
    }

    #[test]
    fn rotated_host_is_aligned_with_x() {
        // Host drives along +y in the raw frame.
        let records = (0..80)
            .map(|f| TrajectoryRecord {
                vehicle_id: 1,
                frame: f,
                t: f as f64 * 0.1,
                x: 100.0,
                y: 2.0 * f as f64,
                lane: None,
            })
            .collect();
        let rec = Recording {
            name: "r".into(),
            dt: 0.1,
            records,
        };
        let s = &build_scenes(&[rec], &SceneConfig::default()).unwrap().scenes[0];
        let h = s.host_history();
        assert!((h[0][0] + 58.0).abs() < 1e-9 && h[0][1].abs() < 1e-9);
        let raw = denormalize(s, s.last_position(0));
        assert!((raw[0] - 100.0).abs() < 1e-9 && (raw[1] - 58.0).abs() < 1e-9);
    }
}
