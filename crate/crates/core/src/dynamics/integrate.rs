use super::state::{ControlInput, DynamicsConfig, GradientProfile, Trajectory, VehicleState};
use crate::error::{Error, Result};

/// Time derivative of `(px, py, heading, speed)` on a road of gradient `slope`.
pub fn state_derivative(s: &VehicleState, u: &ControlInput, slope: f64, cfg: &DynamicsConfig) -> [f64; 4] {
    [
        s.speed * s.heading.cos(),
        s.speed * s.heading.sin(),
        u.yaw_rate,
        u.accel - cfg.gravity * slope.sin(),
    ]
}

fn deriv_raw(x: [f64; 4], u: &ControlInput, slope: f64, cfg: &DynamicsConfig) -> [f64; 4] {
    state_derivative(&VehicleState::from_array(x), u, slope, cfg)
}

fn axpy(x: [f64; 4], h: f64, k: [f64; 4]) -> [f64; 4] {
    [x[0] + h * k[0], x[1] + h * k[1], x[2] + h * k[2], x[3] + h * k[3]]
}

/// Result of one integration step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub state: VehicleState,
    /// Speed went negative and was clamped to zero.
    pub clamped: bool,
}

/// One classical fourth-order Runge-Kutta step from time `t`.
///
/// `control` is sampled at `t`, `t + dt/2` and `t + dt`; the gradient
/// profile likewise.
pub fn rk4_step(
    s: &VehicleState,
    t: f64,
    dt: f64,
    control: impl Fn(f64) -> ControlInput,
    gradient: &GradientProfile,
    cfg: &DynamicsConfig,
) -> Step {
    let x = s.as_array();
    let half = t + 0.5 * dt;
    let (u0, uh, u1) = (control(t), control(half), control(t + dt));
    let (a0, ah, a1) = (gradient.angle_at(t), gradient.angle_at(half), gradient.angle_at(t + dt));

    let k1 = deriv_raw(x, &u0, a0, cfg);
    let k2 = deriv_raw(axpy(x, 0.5 * dt, k1), &uh, ah, cfg);
    let k3 = deriv_raw(axpy(x, 0.5 * dt, k2), &uh, ah, cfg);
    let k4 = deriv_raw(axpy(x, dt, k3), &u1, a1, cfg);

    let mut next = [0.0; 4];
    for i in 0..4 {
        next[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    let clamped = next[3] < 0.0;
    if clamped {
        log::debug!("speed clamped at zero (would have been {:.6} m/s)", next[3]);
        next[3] = 0.0;
    }
    Step {
        state: VehicleState::from_array(next),
        clamped,
    }
}

/// A rollout plus the number of zero-speed clamp events it hit.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub trajectory: Trajectory,
    pub clamp_events: usize,
}

/// Integrates `n` steps with controls held piecewise-constant per step.
pub fn rollout_counted(
    s0: VehicleState,
    controls: &[ControlInput],
    gradient: &GradientProfile,
    dt: f64,
    n: usize,
    cfg: &DynamicsConfig,
) -> Result<Rollout> {
    if controls.len() < n {
        return Err(Error::Contract(format!(
            "rollout of {n} steps needs at least {n} controls, got {}",
            controls.len()
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("time step must be positive, got {dt}")));
    }
    let mut states = Vec::with_capacity(n + 1);
    states.push(s0);
    let mut clamp_events = 0;
    let mut s = s0;
    for (k, u) in controls.iter().take(n).enumerate() {
        let step = rk4_step(&s, k as f64 * dt, dt, |_| *u, gradient, cfg);
        clamp_events += usize::from(step.clamped);
        s = step.state;
        states.push(s);
    }
    if clamp_events > 0 {
        log::debug!("rollout clamped speed {clamp_events} time(s)");
    }
    Ok(Rollout {
        trajectory: Trajectory::new(dt, states)?,
        clamp_events,
    })
}

/// `n`-step rollout; returns `n + 1` states starting with `s0`.
pub fn rollout(
    s0: VehicleState,
    controls: &[ControlInput],
    gradient: &GradientProfile,
    dt: f64,
    n: usize,
    cfg: &DynamicsConfig,
) -> Result<Trajectory> {
    rollout_counted(s0, controls, gradient, dt, n, cfg).map(|r| r.trajectory)
}

/// Continues a trajectory past the prediction horizon with the final control
/// held constant. The gradient profile is indexed from `s_end`.
pub fn extrapolate_beyond_horizon(
    s_end: VehicleState,
    u_end: ControlInput,
    gradient: &GradientProfile,
    dt: f64,
    n: usize,
    cfg: &DynamicsConfig,
) -> Result<Trajectory> {
    rollout(s_end, &vec![u_end; n], gradient, dt, n, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_6};

    fn st(px: f64, py: f64, h: f64, v: f64) -> VehicleState {
        VehicleState::new(px, py, h, v).unwrap()
    }

    #[test]
    fn derivative_examples() {
        let cfg = DynamicsConfig::default();
        assert_eq!(
            state_derivative(&st(0.0, 0.0, 0.0, 10.0), &ControlInput::ZERO, 0.0, &cfg),
            [10.0, 0.0, 0.0, 0.0]
        );
        let d = state_derivative(&st(0.0, 0.0, FRAC_PI_2, 10.0), &ControlInput::ZERO, 0.0, &cfg);
        assert_abs_diff_eq!(d[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(d[1], 10.0, epsilon = 1e-14);
        let d = state_derivative(&st(0.0, 0.0, 0.0, 10.0), &ControlInput::ZERO, FRAC_PI_6, &cfg);
        assert_abs_diff_eq!(d[3], -4.90333, epsilon = 1e-5);
    }

    #[test]
    fn constant_velocity_step_is_exact() {
        let cfg = DynamicsConfig::default();
        let s = rk4_step(
            &st(0.0, 0.0, 0.0, 10.0),
            0.0,
            0.1,
            |_| ControlInput::ZERO,
            &GradientProfile::Flat,
            &cfg,
        );
        assert_eq!(s.state, st(1.0, 0.0, 0.0, 10.0));
        assert!(!s.clamped);
    }

    #[test]
    fn slope_step_matches_closed_form() {
        // v(t) = 10 - g sin(30°) t, px = 10 t - g sin(30°) t² / 2
        let cfg = DynamicsConfig::default();
        let g = GradientProfile::constant(FRAC_PI_6).unwrap();
        let s = rk4_step(&st(0.0, 0.0, 0.0, 10.0), 0.0, 0.1, |_| ControlInput::ZERO, &g, &cfg).state;
        let decel = cfg.gravity * FRAC_PI_6.sin();
        assert_abs_diff_eq!(s.speed, 10.0 - decel * 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(s.px, 1.0 - 0.5 * decel * 0.01, epsilon = 1e-12);
        assert_abs_diff_eq!(s.speed, 9.509667, epsilon = 1e-6);
        assert_abs_diff_eq!(s.px, 0.975483, epsilon = 1e-6);
    }

    #[test]
    fn steep_slope_clamps_speed() {
        let cfg = DynamicsConfig::default();
        let g = GradientProfile::constant(1.2).unwrap();
        let r = rollout_counted(st(0.0, 0.0, 0.0, 0.5), &[ControlInput::ZERO; 5], &g, 0.1, 5, &cfg).unwrap();
        assert!(r.clamp_events > 0);
        assert!(r.trajectory.states().iter().all(|s| s.speed >= 0.0));
        assert_eq!(r.trajectory.last().speed, 0.0);
    }

    #[test]
    fn rollout_edge_cases() {
        let cfg = DynamicsConfig::default();
        let s0 = st(1.0, 2.0, 0.3, 4.0);
        let t = rollout(s0, &[], &GradientProfile::Flat, 0.1, 0, &cfg).unwrap();
        assert_eq!(t.states(), &[s0]);
        let err = rollout(s0, &[ControlInput::ZERO; 2], &GradientProfile::Flat, 0.1, 3, &cfg);
        assert!(matches!(err, Err(Error::Contract(_))));
    }

    #[test]
    fn uniform_motion_advances_one_metre_per_step() {
        let cfg = DynamicsConfig::default();
        let t = rollout(
            st(0.0, 0.0, 0.0, 10.0),
            &[ControlInput::ZERO; 50],
            &GradientProfile::Flat,
            0.1,
            50,
            &cfg,
        )
        .unwrap();
        for w in t.states().windows(2) {
            assert_abs_diff_eq!(w[1].px - w[0].px, 1.0, epsilon = 1e-12);
            assert_eq!(w[1].speed, 10.0);
        }
    }

    #[test]
    fn extrapolation_cases() {
        let cfg = DynamicsConfig::default();
        let s = st(0.0, 0.0, 0.0, 10.0);
        let t = extrapolate_beyond_horizon(s, ControlInput::ZERO, &GradientProfile::Flat, 0.1, 0, &cfg).unwrap();
        assert_eq!(t.len(), 1);
        let t =
            extrapolate_beyond_horizon(s, ControlInput::new(0.0, 0.2), &GradientProfile::Flat, 0.1, 100, &cfg).unwrap();
        for p in t.states() {
            let r = (p.px.powi(2) + (p.py - 50.0).powi(2)).sqrt();
            assert_abs_diff_eq!(r, 50.0, epsilon = 1e-4);
        }
    }
}
