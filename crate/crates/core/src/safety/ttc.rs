use serde::{Deserialize, Serialize};

use super::distribution::TtcDistribution;
use crate::dynamics::{estimate_controls, extrapolate_beyond_horizon, DynamicsConfig, GradientProfile, Trajectory};
use crate::error::{Error, Result};

/// Collision thresholds and the sampled search grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SafetyThresholds {
    /// Longitudinal threshold (m).
    pub rx: f64,
    /// Lateral threshold (m).
    pub ry: f64,
    /// Search horizon (s).
    pub horizon: f64,
    /// s
    pub dt: f64,
}

impl Default for SafetyThresholds {
    fn default() -> Self {
        Self {
            rx: 5.0,
            ry: 2.0,
            horizon: 10.0,
            dt: 0.1,
        }
    }
}

impl SafetyThresholds {
    pub fn validate(&self) -> Result<()> {
        if [self.rx, self.ry, self.horizon, self.dt]
            .iter()
            .any(|v| !(*v > 0.0) || !v.is_finite())
        {
            return Err(Error::Config(format!("thresholds must all be positive: {self:?}")));
        }
        Ok(())
    }

    /// Number of search steps after `t0`.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

/// First step `k >= 1` where both separations are within thresholds.
fn first_crossing(host: &[[f64; 2]], other: &[[f64; 2]], thr: &SafetyThresholds) -> Option<usize> {
    let last = thr
        .steps()
        .min(host.len().saturating_sub(1))
        .min(other.len().saturating_sub(1));
    (1..=last).find(|&k| (host[k][0] - other[k][0]).abs() <= thr.rx && (host[k][1] - other[k][1]).abs() <= thr.ry)
}

fn check_clock(t: &Trajectory, thr: &SafetyThresholds) -> Result<()> {
    if (t.dt() - thr.dt).abs() > 1e-9 * thr.dt {
        return Err(Error::Contract(format!(
            "trajectory sampled at {} s, analysis clock is {} s",
            t.dt(),
            thr.dt
        )));
    }
    Ok(())
}

/// Collision time of one host/ambient trajectory pair, as a duration from
/// the first sample; `None` if no crossing occurs within the horizon.
pub fn hf_ttc_mode(host: &Trajectory, ambient: &Trajectory, thr: &SafetyThresholds) -> Result<Option<f64>> {
    check_clock(host, thr)?;
    check_clock(ambient, thr)?;
    Ok(first_crossing(&host.positions(), &ambient.positions(), thr).map(|k| k as f64 * thr.dt))
}

/// HF-TTC and HF-ITTC distributions of a host trajectory against the modes
/// of one ambient vehicle.
pub fn ttc_distribution(
    host: &Trajectory,
    modes: &[Trajectory],
    probabilities: &[f64],
    thr: &SafetyThresholds,
) -> Result<(TtcDistribution, TtcDistribution)> {
    if modes.len() != probabilities.len() || modes.is_empty() {
        return Err(Error::Contract(format!(
            "{} modes with {} probabilities",
            modes.len(),
            probabilities.len()
        )));
    }
    let mut atoms = Vec::new();
    let mut none = 0.0;
    for (m, &p) in modes.iter().zip(probabilities) {
        match hf_ttc_mode(host, m, thr)? {
            Some(t) if p > 0.0 => atoms.push((t, p)),
            Some(_) => {}
            None => none += p,
        }
    }
    let ttc = TtcDistribution::from_atoms(atoms, none)?;
    let ittc = ttc.reciprocal();
    Ok((ttc, ittc))
}

/// Constant planar velocity from the last two frames of each vehicle,
/// searched with the same crossing rule.
pub fn traditional_ttc(host: [[f64; 2]; 2], ambient: [[f64; 2]; 2], thr: &SafetyThresholds) -> Option<f64> {
    let project = |p: [[f64; 2]; 2]| -> Vec<[f64; 2]> {
        let v = [p[1][0] - p[0][0], p[1][1] - p[0][1]];
        (0..=thr.steps())
            .map(|k| [p[1][0] + k as f64 * v[0], p[1][1] + k as f64 * v[1]])
            .collect()
    };
    first_crossing(&project(host), &project(ambient), thr).map(|k| k as f64 * thr.dt)
}

/// Turns sampled positions (the first at `t0`) into a trajectory covering
/// `steps` samples after `t0`, continuing past the data with the final
/// estimated control held constant.
pub fn extend_positions(positions: &[[f64; 2]], dt: f64, steps: usize, cfg: &DynamicsConfig) -> Result<Trajectory> {
    let est = estimate_controls(positions, dt, cfg)?;
    let mut states: Vec<_> = positions
        .iter()
        .zip(est.headings.iter().zip(&est.speeds))
        .map(|(p, (&h, &v))| crate::dynamics::VehicleState {
            px: p[0],
            py: p[1],
            heading: h,
            speed: v,
        })
        .collect();
    if states.len() > steps + 1 {
        states.truncate(steps + 1);
    } else if states.len() < steps + 1 {
        let n = steps + 1 - states.len();
        let tail = extrapolate_beyond_horizon(
            est.final_state(),
            est.final_control(),
            &GradientProfile::Flat,
            dt,
            n,
            cfg,
        )?;
        states.extend_from_slice(&tail.states()[1..]);
    }
    Trajectory::new(dt, states)
}
