//! Recovering speed, heading and control inputs from sampled positions.

use super::state::{ControlInput, DynamicsConfig, VehicleState};
use crate::error::{Error, Result};

/// Centered moving-average window applied to the differenced controls.
pub const SMOOTHING_WINDOW: usize = 5;

/// Below this displacement per frame (m) a vehicle is treated as standing.
const STATIONARY_STEP: f64 = 1e-9;

/// Per-frame kinematics recovered from a position history.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlEstimate {
    pub speeds: Vec<f64>,
    pub headings: Vec<f64>,
    pub controls: Vec<ControlInput>,
    pub positions: Vec<[f64; 2]>,
    /// Every sample was at the same point; all outputs are zero.
    pub degenerate: bool,
}

impl ControlEstimate {
    /// State at the final frame.
    pub fn final_state(&self) -> VehicleState {
        let k = self.positions.len() - 1;
        VehicleState {
            px: self.positions[k][0],
            py: self.positions[k][1],
            heading: self.headings[k],
            speed: self.speeds[k],
        }
    }

    pub fn final_control(&self) -> ControlInput {
        self.controls[self.controls.len() - 1]
    }

    pub fn mean_control(&self) -> ControlInput {
        let n = self.controls.len() as f64;
        let (a, w) = self
            .controls
            .iter()
            .fold((0.0, 0.0), |(a, w), u| (a + u.accel, w + u.yaw_rate));
        ControlInput::new(a / n, w / n)
    }
}

/// Second-order finite-difference derivative: central in the interior,
/// one-sided three-point at the ends. Needs at least 3 samples.
pub(crate) fn derivative(values: &[f64], dt: f64) -> Vec<f64> {
    let n = values.len();
    debug_assert!(n >= 3);
    let mut out = vec![0.0; n];
    out[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * dt);
    out[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * dt);
    for k in 1..n - 1 {
        out[k] = (values[k + 1] - values[k - 1]) / (2.0 * dt);
    }
    out
}

/// Centered moving average whose window shrinks symmetrically near the ends.
pub(crate) fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    let n = values.len();
    let half = window / 2;
    (0..n)
        .map(|k| {
            let h = half.min(k).min(n - 1 - k);
            let s = &values[k - h..=k + h];
            s.iter().sum::<f64>() / s.len() as f64
        })
        .collect()
}

fn unwrap_angles(angles: &mut [f64]) {
    use std::f64::consts::{PI, TAU};
    for k in 1..angles.len() {
        let mut d = angles[k] - angles[k - 1];
        while d > PI {
            d -= TAU;
        }
        while d < -PI {
            d += TAU;
        }
        angles[k] = angles[k - 1] + d;
    }
}

/// Estimates `(a, yaw rate)` per frame from positions sampled every `dt`.
///
/// Speed and heading come from differenced positions; acceleration and yaw
/// rate from differencing those again, then smoothing over
/// [`SMOOTHING_WINDOW`] frames and clamping to the configured bounds.
pub fn estimate_controls(positions: &[[f64; 2]], dt: f64, cfg: &DynamicsConfig) -> Result<ControlEstimate> {
    let n = positions.len();
    if n < 3 {
        return Err(Error::Contract(format!(
            "control estimation needs at least 3 frames, got {n}"
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("time step must be positive, got {dt}")));
    }
    let degenerate = positions.iter().all(|p| p == &positions[0]);
    if degenerate {
        return Ok(ControlEstimate {
            speeds: vec![0.0; n],
            headings: vec![0.0; n],
            controls: vec![ControlInput::ZERO; n],
            positions: positions.to_vec(),
            degenerate: true,
        });
    }

    let xs: Vec<f64> = positions.iter().map(|p| p[0]).collect();
    let ys: Vec<f64> = positions.iter().map(|p| p[1]).collect();
    let vx = derivative(&xs, dt);
    let vy = derivative(&ys, dt);
    let speeds: Vec<f64> = vx.iter().zip(&vy).map(|(a, b)| a.hypot(*b)).collect();

    // Headings are undefined while standing still; borrow the nearest moving
    // frame's heading, preferring the past.
    let moving: Vec<bool> = speeds.iter().map(|&s| s * dt > STATIONARY_STEP).collect();
    let first_moving = moving.iter().position(|&m| m).unwrap_or(0);
    let mut headings = vec![0.0; n];
    let mut last = vy[first_moving].atan2(vx[first_moving]);
    for k in 0..n {
        if moving[k] {
            last = vy[k].atan2(vx[k]);
        }
        headings[k] = last;
    }
    unwrap_angles(&mut headings);

    let accel = smooth(&derivative(&speeds, dt), SMOOTHING_WINDOW);
    let yaw = smooth(&derivative(&headings, dt), SMOOTHING_WINDOW);
    let controls = accel
        .iter()
        .zip(&yaw)
        .map(|(&a, &w)| ControlInput::new(a, w).clamped(cfg))
        .collect();

    Ok(ControlEstimate {
        speeds,
        headings,
        controls,
        positions: positions.to_vec(),
        degenerate: false,
    })
}
