//! Kinematic bicycle model with road gradient, RK4 integration, control
//! estimation from positions, and host behavior models.

pub mod behavior;
pub mod estimate;
pub mod integrate;
pub mod state;

pub use behavior::{behavior_controls, BehaviorMode, BehaviorRegistry, HostBehavior};
pub use estimate::{estimate_controls, ControlEstimate};
pub use integrate::{extrapolate_beyond_horizon, rk4_step, rollout, rollout_counted, state_derivative, Rollout};
pub use state::{
    steering_to_yaw_rate, ControlInput, DynamicsConfig, GradientProfile, Trajectory, VehicleState, STANDARD_GRAVITY,
};
