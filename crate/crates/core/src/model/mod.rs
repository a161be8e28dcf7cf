//! Hypergraph-transformer trajectory predictor.
//!
//! Histories are embedded per vehicle, a hypergraph is inferred from the
//! cosine affinity of those embeddings, and stacked attention layers mix
//! node and hyperedge features before per-mode decoder heads emit
//! trajectories and confidence logits.

pub mod config;
pub mod hypothesis;
pub mod network;

pub use config::{load_sidecar, save_sidecar, sidecar_path, Ablation, ModelConfig};
pub use hypothesis::{HostHypothesis, HostSource, Phase};
pub use network::{Forward, ModeSet, Model, Prediction};

use crate::hypergraph::HyperedgeGroups;
use crate::numerics::Tensor;

/// Initial hyperedge features: the mean of member node features.
pub fn init_hyperedge_features(nodes: &Tensor, groups: &HyperedgeGroups) -> Tensor {
    let d = nodes.cols();
    let rows: Vec<Vec<f64>> = groups
        .hyperedges()
        .iter()
        .map(|members| {
            let mut acc = vec![0.0; d];
            for &i in members {
                for (a, v) in acc.iter_mut().zip(nodes.row(i)) {
                    *a += v;
                }
            }
            acc.iter().map(|v| v / members.len() as f64).collect()
        })
        .collect();
    if rows.is_empty() {
        return Tensor::zeros(&[1, d]);
    }
    Tensor::from_rows(&rows)
}
