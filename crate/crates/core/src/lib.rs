//! Interaction-aware active-safety pipeline.
//!
//! A kinematic bicycle model with road gradient generates host trajectories
//! under several behavior hypotheses; a hypergraph transformer predicts
//! multi-modal futures for the surrounding vehicles; and the two are combined
//! into per-pair time-to-collision distributions.

// `!(x > 0.0)` is the idiom for rejecting NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod dynamics;
pub mod error;
pub mod hypergraph;
pub mod model;
pub mod numerics;
pub mod safety;
pub mod training;

pub use error::{Error, Result};
