//! Loss, optimization, and the evaluation protocol with its metrics.

pub mod evaluate;
pub mod loss;
pub mod metrics;
pub mod optim;
pub mod train;

pub use evaluate::{constant_velocity_prediction, evaluate, BehaviorMetrics, BASELINE};
pub use loss::{loss, scene_loss, select_best_mode, LossTerms, SceneLoss};
pub use metrics::{compute_metrics, HorizonRmse, MetricsReport, DEFAULT_HORIZONS};
pub use optim::{Adam, AdamConfig};
pub use train::{batch_gradient, train, LossRecord, TrainConfig, TrainOutcome};
