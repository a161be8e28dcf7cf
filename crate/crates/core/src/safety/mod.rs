//! Time-to-collision analysis over predicted mode sets.
//!
//! A collision is the first sampled instant where both the longitudinal
//! and the lateral separation fall within their thresholds. Each predicted
//! mode contributes its collision time with the mode's probability; modes
//! that never collide within the search horizon pool into an explicit
//! no-event mass.

pub mod distribution;
pub mod risk;
pub mod ttc;

pub use distribution::TtcDistribution;
pub use risk::{scenario_risk, write_cdf_csv, ModeSource, PairRisk, RiskReport};
pub use ttc::{extend_positions, hf_ttc_mode, traditional_ttc, ttc_distribution, SafetyThresholds};
