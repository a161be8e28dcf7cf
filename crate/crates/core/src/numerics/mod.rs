//! Dense tensors, the differentiable primitives the network needs, and a
//! reverse-mode tape.

pub mod graph;
pub mod ops;
pub mod params;
pub mod tensor;

pub use graph::{GradientMap, Graph, NodeId};
pub use params::ParamStore;
pub use tensor::Tensor;
