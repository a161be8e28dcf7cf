//! Scripted traffic scenes with exact ground truth.
//!
//! Every vehicle follows a list of control segments integrated with the
//! bicycle model, so futures are kinematically consistent by construction.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::records::{Recording, TrajectoryRecord};
use super::scene::{NormalizationFrame, Scene};
use crate::dynamics::{rollout_counted, ControlInput, DynamicsConfig, GradientProfile, Trajectory, VehicleState};
use crate::error::{Error, Result};

/// One control segment of a vehicle script.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptSegment {
    pub kind: SegmentKind,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// s
    pub duration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    /// Zero control.
    Cruise,
    /// `accel` (m/s²).
    Accelerate,
    /// `decel` (m/s², positive).
    Brake,
    /// Acceleration linear in time from `from` to `to` (m/s²).
    BrakeRamp,
    /// Yaw-rate pulse: `+yaw_rate` for the first half, `-yaw_rate` for the second.
    LaneChange,
    /// Copies the acceleration of vehicle `leader` delayed by `delay` seconds.
    /// The leader must be listed earlier.
    Follow,
}

impl ScriptSegment {
    fn param(&self, key: &str) -> Result<f64> {
        self.params
            .get(key)
            .copied()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::Spec(format!("{:?} segment needs a finite `{key}` parameter", self.kind)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleScript {
    pub id: u64,
    pub x0: f64,
    pub y0: f64,
    #[serde(default)]
    pub psi0: f64,
    pub v0: f64,
    #[serde(default)]
    pub script: Vec<ScriptSegment>,
}

fn default_dt() -> f64 {
    0.1
}
fn default_history() -> usize {
    30
}
fn default_future() -> usize {
    50
}

/// A scripted scenario. After the last segment a vehicle cruises.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_history")]
    pub history: usize,
    #[serde(default = "default_future")]
    pub future: usize,
    pub host: u64,
    /// Extra simulated time after the first prediction instant (s).
    #[serde(default)]
    pub window_s: f64,
    /// Spacing of prediction instants within the window (s); absent means
    /// only the first instant.
    #[serde(default)]
    pub snapshot_interval_s: Option<f64>,
    #[serde(default)]
    pub gradient: GradientProfile,
    pub vehicles: Vec<VehicleScript>,
}

impl ScenarioSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Spec(format!("scenario spec: {e}")))
    }

    fn window_steps(&self) -> usize {
        (self.window_s / self.dt).round() as usize
    }

    pub fn total_frames(&self) -> usize {
        self.history + self.future + self.window_steps()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || self.history < 3 || self.future < 1 || !(self.window_s >= 0.0) {
            return Err(Error::Spec(format!(
                "scenario `{}`: need dt > 0, history >= 3, future >= 1, window >= 0",
                self.name
            )));
        }
        if let Some(iv) = self.snapshot_interval_s {
            if !(iv > 0.0) {
                return Err(Error::Spec("snapshot interval must be positive".into()));
            }
        }
        self.gradient.validate().map_err(|e| Error::Spec(e.to_string()))?;
        let mut seen = Vec::new();
        for v in &self.vehicles {
            if seen.contains(&v.id) {
                return Err(Error::Spec(format!("duplicate vehicle id {}", v.id)));
            }
            if !(v.v0 >= 0.0) || ![v.x0, v.y0, v.psi0].iter().all(|x| x.is_finite()) {
                return Err(Error::Spec(format!("vehicle {}: invalid initial state", v.id)));
            }
            for seg in &v.script {
                if !(seg.duration > 0.0) {
                    return Err(Error::Spec(format!(
                        "vehicle {}: segment durations must be positive",
                        v.id
                    )));
                }
                if seg.kind == SegmentKind::Follow {
                    let leader = seg.param("leader")? as u64;
                    if !seen.contains(&leader) {
                        return Err(Error::Spec(format!(
                            "vehicle {} follows {leader}, which is not listed before it",
                            v.id
                        )));
                    }
                }
            }
            seen.push(v.id);
        }
        if !seen.contains(&self.host) {
            return Err(Error::Spec(format!("host {} is not among the vehicles", self.host)));
        }
        Ok(())
    }
}

/// Simulated trajectories of every vehicle over `total_frames()` frames.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub spec: ScenarioSpec,
    /// In listing order.
    pub trajectories: Vec<(u64, Trajectory)>,
}

fn controls_for(
    v: &VehicleScript,
    steps: usize,
    dt: f64,
    done: &BTreeMap<u64, Vec<ControlInput>>,
) -> Result<Vec<ControlInput>> {
    let mut out = Vec::with_capacity(steps);
    for k in 0..steps {
        let t = k as f64 * dt;
        let mut start = 0.0;
        let mut u = ControlInput::ZERO;
        for seg in &v.script {
            // small guard so boundaries on the frame grid go to the next segment
            if t + 1e-9 < start + seg.duration {
                let local = t - start;
                u = match seg.kind {
                    SegmentKind::Cruise => ControlInput::ZERO,
                    SegmentKind::Accelerate => ControlInput::new(seg.param("accel")?, 0.0),
                    SegmentKind::Brake => ControlInput::new(-seg.param("decel")?.abs(), 0.0),
                    SegmentKind::BrakeRamp => {
                        let (a0, a1) = (seg.param("from")?, seg.param("to")?);
                        ControlInput::new(a0 + (a1 - a0) * local / seg.duration, 0.0)
                    }
                    SegmentKind::LaneChange => {
                        let w = seg.param("yaw_rate")?;
                        ControlInput::new(0.0, if local + 1e-9 < seg.duration / 2.0 { w } else { -w })
                    }
                    SegmentKind::Follow => {
                        let leader = &done[&(seg.param("leader")? as u64)];
                        let delay = (seg.params.get("delay").copied().unwrap_or(0.0) / dt).round() as usize;
                        if k >= delay {
                            ControlInput::new(leader[k - delay].accel, 0.0)
                        } else {
                            ControlInput::ZERO
                        }
                    }
                };
                break;
            }
            start += seg.duration;
        }
        out.push(u);
    }
    Ok(out)
}

/// Integrates every vehicle script. A negative initial speed or any speed
/// clamp during the run makes the spec infeasible.
pub fn simulate(spec: &ScenarioSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let cfg = DynamicsConfig::default();
    let steps = spec.total_frames() - 1;
    let mut controls: BTreeMap<u64, Vec<ControlInput>> = BTreeMap::new();
    let mut trajectories = Vec::with_capacity(spec.vehicles.len());
    for v in &spec.vehicles {
        let u = controls_for(v, steps, spec.dt, &controls)?;
        for c in &u {
            c.validate(&cfg)
                .map_err(|e| Error::Spec(format!("vehicle {}: {e}", v.id)))?;
        }
        let s0 = VehicleState::new(v.x0, v.y0, v.psi0, v.v0).map_err(|e| Error::Spec(e.to_string()))?;
        let run = rollout_counted(s0, &u, &spec.gradient, spec.dt, steps, &cfg)?;
        if run.clamp_events > 0 {
            return Err(Error::Spec(format!(
                "scenario `{}`: vehicle {} would need negative speed",
                spec.name, v.id
            )));
        }
        controls.insert(v.id, u);
        trajectories.push((v.id, run.trajectory));
    }
    Ok(SynthOutput {
        spec: spec.clone(),
        trajectories,
    })
}

impl SynthOutput {
    /// Long-format records for the whole run.
    pub fn recording(&self) -> Recording {
        let records = self
            .trajectories
            .iter()
            .flat_map(|(id, traj)| {
                traj.states().iter().enumerate().map(move |(f, s)| TrajectoryRecord {
                    vehicle_id: *id,
                    frame: f as i64,
                    t: f as f64 * self.spec.dt,
                    x: s.px,
                    y: s.py,
                    lane: None,
                })
            })
            .collect();
        Recording {
            name: self.spec.name.clone(),
            dt: self.spec.dt,
            records,
        }
    }

    /// Frame indices of the last history frame of each snapshot.
    pub fn snapshot_anchors(&self) -> Vec<usize> {
        let first = self.spec.history - 1;
        let extra = self.spec.window_steps();
        match self.spec.snapshot_interval_s {
            None => vec![first],
            Some(iv) => {
                let every = ((iv / self.spec.dt).round() as usize).max(1);
                (0..=extra / every).map(|j| first + j * every).collect()
            }
        }
    }

    /// The scene whose last history frame is `anchor`, in the host frame
    /// given by the host's true pose. The host is row 0; the other vehicles
    /// follow in listing order.
    pub fn scene_at(&self, anchor: usize) -> Result<Scene> {
        let spec = &self.spec;
        if anchor + 1 < spec.history || anchor + spec.future >= spec.total_frames() {
            return Err(Error::Contract(format!("snapshot anchor {anchor} out of range")));
        }
        let (_, host) = self
            .trajectories
            .iter()
            .find(|(id, _)| *id == spec.host)
            .expect("validated host");
        let pose = host.states()[anchor];
        let frame = NormalizationFrame {
            origin: pose.position(),
            rotation: pose.heading,
        };
        let order: Vec<&(u64, Trajectory)> =
            std::iter::once(self.trajectories.iter().find(|(id, _)| *id == spec.host).unwrap())
                .chain(self.trajectories.iter().filter(|(id, _)| *id != spec.host))
                .collect();
        let slice = |t: &Trajectory, from: usize, len: usize| -> Vec<[f64; 2]> {
            t.states()[from..from + len]
                .iter()
                .map(|s| frame.to_local(s.position()))
                .collect()
        };
        let start = anchor + 1 - spec.history;
        Ok(Scene {
            name: if anchor + 1 == spec.history {
                spec.name.clone()
            } else {
                format!("{}_t{:.1}", spec.name, (anchor + 1 - spec.history) as f64 * spec.dt)
            },
            recording: spec.name.clone(),
            vehicle_ids: order.iter().map(|(id, _)| *id).collect(),
            dt: spec.dt,
            start_frame: start as i64,
            history: order.iter().map(|(_, t)| slice(t, start, spec.history)).collect(),
            future: order.iter().map(|(_, t)| slice(t, anchor + 1, spec.future)).collect(),
            frame,
        })
    }

    pub fn snapshots(&self) -> Result<Vec<Scene>> {
        self.snapshot_anchors().into_iter().map(|a| self.scene_at(a)).collect()
    }
}

/// Simulates a spec and returns its first snapshot.
pub fn synth_scenario(spec: &ScenarioSpec) -> Result<Scene> {
    simulate(spec)?.scene_at(spec.history - 1)
}

/// Random corpus of interacting highway traffic: a braking platoon in one
/// lane, a second platoon with lane changes in the neighbouring lane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSpec {
    pub recordings: usize,
    /// s
    pub duration_s: f64,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            recordings: 6,
            duration_s: 20.0,
            seed: 0,
        }
    }
}

fn seg(kind: SegmentKind, params: &[(&str, f64)], duration: f64) -> ScriptSegment {
    ScriptSegment {
        kind,
        params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        duration,
    }
}

/// Leader script of 2-5 s segments (cruise, brake, ramped brake, speed-up
/// and, on multi-lane roads, lane changes) whose planned speed stays within
/// [8, 34] m/s.
fn leader_script(rng: &mut ChaCha8Rng, v0: f64, total: f64, lane_changes: bool, lane_dir: f64) -> Vec<ScriptSegment> {
    let mut t = 0.0;
    let mut v = v0;
    let mut out = Vec::new();
    while t < total {
        let dur: f64 = rng.gen_range(2.0..5.0);
        let pick = rng.gen_range(0..6);
        let s = match pick {
            0 | 5 => seg(SegmentKind::Cruise, &[], dur),
            4 if !lane_changes => seg(SegmentKind::Cruise, &[], dur),
            1 => {
                let d = rng.gen_range(1.0..4.0f64).min((v - 8.0).max(0.0) / dur);
                v -= d * dur;
                seg(SegmentKind::Brake, &[("decel", d)], dur)
            }
            2 => {
                let to = -rng.gen_range(1.0..4.0f64).min(2.0 * (v - 8.0).max(0.0) / dur);
                v += to * dur / 2.0;
                seg(SegmentKind::BrakeRamp, &[("from", 0.0), ("to", to)], dur)
            }
            3 => {
                let a = rng.gen_range(0.5..2.5f64).min((34.0 - v).max(0.0) / dur);
                v += a * dur;
                seg(SegmentKind::Accelerate, &[("accel", a)], dur)
            }
            _ => {
                let dur = rng.gen_range(3.0..5.0);
                // ω (T/2)² v ≈ lane width
                let w = lane_dir * 3.5 / (v.max(8.0) * (dur / 2.0) * (dur / 2.0));
                seg(SegmentKind::LaneChange, &[("yaw_rate", w.clamp(-0.5, 0.5))], dur)
            }
        };
        t += s.duration;
        out.push(s);
    }
    out
}

/// Random scripted scenario used for corpus recordings.
pub fn random_scenario(name: &str, duration_s: f64, rng: &mut ChaCha8Rng) -> ScenarioSpec {
    let mut vehicles = Vec::new();
    let mut next_id = 1u64;
    for (lane, y) in [(0, 0.0), (1, 3.5)] {
        let size = rng.gen_range(3..=4);
        let v0: f64 = rng.gen_range(14.0..28.0);
        let mut x = rng.gen_range(50.0..70.0);
        let mut ahead: Option<u64> = None;
        for _ in 0..size {
            let id = next_id;
            next_id += 1;
            let script = match ahead {
                None => leader_script(rng, v0, duration_s, lane == 1, -1.0),
                Some(l) => vec![seg(
                    SegmentKind::Follow,
                    &[("leader", l as f64), ("delay", rng.gen_range(5..=15) as f64 * 0.1)],
                    duration_s,
                )],
            };
            vehicles.push(VehicleScript {
                id,
                x0: x,
                y0: y + rng.gen_range(-0.3..0.3),
                psi0: 0.0,
                v0: v0 + rng.gen_range(-0.5..0.5),
                script,
            });
            ahead = Some(id);
            x -= rng.gen_range(14.0..26.0);
        }
    }
    let total_frames = (duration_s / 0.1).round() as usize + 1;
    ScenarioSpec {
        name: name.to_string(),
        dt: 0.1,
        history: 30,
        future: 50,
        host: 1,
        window_s: (total_frames.saturating_sub(80)) as f64 * 0.1,
        snapshot_interval_s: None,
        gradient: GradientProfile::Flat,
        vehicles,
    }
}

/// Simulated recordings for a corpus. Draws that turn out infeasible are
/// redrawn.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<Vec<Recording>> {
    if spec.recordings == 0 || spec.duration_s < 8.0 {
        return Err(Error::Config(
            "corpus needs at least one recording of 8 s or more".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.recordings);
    while out.len() < spec.recordings {
        let name = format!("synth_{:03}", out.len());
        let scenario = random_scenario(&name, spec.duration_s, &mut rng);
        match simulate(&scenario) {
            Ok(sim) => out.push(sim.recording()),
            Err(Error::Spec(msg)) => log::debug!("redrawing {name}: {msg}"),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
