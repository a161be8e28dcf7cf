use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard gravity, m/s².
pub const STANDARD_GRAVITY: f64 = 9.80665;

/// Pose and speed of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    /// m
    pub px: f64,
    /// m
    pub py: f64,
    /// rad
    pub heading: f64,
    /// m/s, never negative
    pub speed: f64,
}

impl VehicleState {
    pub fn new(px: f64, py: f64, heading: f64, speed: f64) -> Result<Self> {
        if ![px, py, heading, speed].iter().all(|v| v.is_finite()) {
            return Err(Error::Domain("vehicle state must be finite".into()));
        }
        if speed < 0.0 {
            return Err(Error::Domain(format!("negative speed {speed} m/s")));
        }
        Ok(Self { px, py, heading, speed })
    }

    pub fn position(&self) -> [f64; 2] {
        [self.px, self.py]
    }

    pub(crate) fn as_array(&self) -> [f64; 4] {
        [self.px, self.py, self.heading, self.speed]
    }

    pub(crate) fn from_array(a: [f64; 4]) -> Self {
        Self {
            px: a[0],
            py: a[1],
            heading: a[2],
            speed: a[3],
        }
    }
}

/// Commanded longitudinal acceleration and yaw rate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    /// m/s²
    pub accel: f64,
    /// rad/s
    pub yaw_rate: f64,
}

impl ControlInput {
    pub const ZERO: ControlInput = ControlInput {
        accel: 0.0,
        yaw_rate: 0.0,
    };

    pub fn new(accel: f64, yaw_rate: f64) -> Self {
        Self { accel, yaw_rate }
    }

    pub fn clamped(self, cfg: &DynamicsConfig) -> Self {
        Self {
            accel: self.accel.clamp(-cfg.max_accel, cfg.max_accel),
            yaw_rate: self.yaw_rate.clamp(-cfg.max_yaw_rate, cfg.max_yaw_rate),
        }
    }

    pub fn validate(&self, cfg: &DynamicsConfig) -> Result<()> {
        if !self.accel.is_finite() || !self.yaw_rate.is_finite() {
            return Err(Error::Domain("control input must be finite".into()));
        }
        if self.accel.abs() > cfg.max_accel || self.yaw_rate.abs() > cfg.max_yaw_rate {
            return Err(Error::Domain(format!(
                "control ({}, {}) outside bounds |a| <= {}, |w| <= {}",
                self.accel, self.yaw_rate, cfg.max_accel, cfg.max_yaw_rate
            )));
        }
        Ok(())
    }
}

/// Physical constants and control bounds for the bicycle model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsConfig {
    pub gravity: f64,
    /// m
    pub wheelbase: f64,
    /// m/s²
    pub max_accel: f64,
    /// rad/s
    pub max_yaw_rate: f64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            gravity: STANDARD_GRAVITY,
            wheelbase: 2.7,
            max_accel: 8.0,
            max_yaw_rate: 1.0,
        }
    }
}

/// Road gradient angle as a function of time since the start of a rollout.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GradientProfile {
    #[default]
    Flat,
    Constant {
        angle: f64,
    },
    /// Piecewise-constant samples every `dt` seconds; the last sample holds.
    Schedule {
        dt: f64,
        angles: Vec<f64>,
    },
}

impl GradientProfile {
    pub fn constant(angle: f64) -> Result<Self> {
        let p = GradientProfile::Constant { angle };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |a: f64| a.is_finite() && a.abs() < FRAC_PI_2;
        let valid = match self {
            GradientProfile::Flat => true,
            GradientProfile::Constant { angle } => ok(*angle),
            GradientProfile::Schedule { dt, angles } => {
                *dt > 0.0 && !angles.is_empty() && angles.iter().all(|&a| ok(a))
            }
        };
        if valid {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid road gradient profile {self:?}")))
        }
    }

    pub fn angle_at(&self, t: f64) -> f64 {
        match self {
            GradientProfile::Flat => 0.0,
            GradientProfile::Constant { angle } => *angle,
            GradientProfile::Schedule { dt, angles } => {
                let idx = if t <= 0.0 { 0 } else { (t / dt).floor() as usize };
                angles[idx.min(angles.len() - 1)]
            }
        }
    }
}

/// States sampled every `dt` seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    dt: f64,
    states: Vec<VehicleState>,
}

impl Trajectory {
    pub fn new(dt: f64, states: Vec<VehicleState>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Domain(format!(
                "trajectory time step must be positive, got {dt}"
            )));
        }
        if states.is_empty() {
            return Err(Error::Domain("trajectory needs at least one state".into()));
        }
        Ok(Self { dt, states })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn states(&self) -> &[VehicleState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn first(&self) -> &VehicleState {
        &self.states[0]
    }

    pub fn last(&self) -> &VehicleState {
        &self.states[self.states.len() - 1]
    }

    pub fn positions(&self) -> Vec<[f64; 2]> {
        self.states.iter().map(VehicleState::position).collect()
    }
}

/// Yaw rate induced by front steering angle `steer` on a bicycle with the
/// given wheelbase.
pub fn steering_to_yaw_rate(speed: f64, steer: f64, wheelbase: f64) -> Result<f64> {
    if !(wheelbase > 0.0) {
        return Err(Error::Domain(format!("wheelbase must be positive, got {wheelbase}")));
    }
    if !steer.is_finite() || steer.abs() >= FRAC_PI_2 {
        return Err(Error::Domain(format!(
            "steering angle {steer} rad outside (-pi/2, pi/2)"
        )));
    }
    Ok(speed / wheelbase * steer.tan())
}
