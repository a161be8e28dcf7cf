//! Tape-based reverse-mode differentiation over [`Tensor`] values.
//!
//! A [`Graph`] records each primitive as it is applied. Nodes only reference
//! earlier nodes, so the tape order is a topological order and the backward
//! pass is a single reverse sweep.

use std::collections::BTreeMap;

use super::ops;
use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    MatMulT(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Relu(NodeId),
    SoftmaxRows(NodeId),
    LogSoftmaxRows(NodeId),
    LayerNormRows { x: NodeId, gamma: NodeId, beta: NodeId },
    ConcatCols(Vec<NodeId>),
    SumRows(NodeId),
    Sum(NodeId),
    Mean(NodeId),
    SquaredError(NodeId, NodeId),
    L2Norm(NodeId),
    Cosine(NodeId, NodeId),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
    param: Option<String>,
}

/// Gradients keyed by parameter name; shapes match the parameters.
pub type GradientMap = BTreeMap<String, Tensor>;

/// A computation graph under construction.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: BTreeMap<String, NodeId>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> NodeId {
        debug_assert!(value.is_finite(), "non-finite value from {op:?}");
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
            param: None,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn ng(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|i| self.nodes[i.0].needs_grad)
    }

    /// A non-trainable input.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf, false)
    }

    /// A trainable leaf. Repeated requests for the same name share one node.
    pub fn param(&mut self, name: &str, value: &Tensor) -> NodeId {
        if let Some(&id) = self.params.get(name) {
            return id;
        }
        let id = self.push(value.clone(), Op::Leaf, true);
        self.nodes[id.0].param = Some(name.to_string());
        self.params.insert(name.to_string(), id);
        id
    }

    /// Looks a parameter up in `store` and registers it as a trainable leaf.
    pub fn param_from(&mut self, store: &ParamStore, name: &str) -> Result<NodeId> {
        let t = store
            .get(name)
            .ok_or_else(|| Error::Contract(format!("unknown parameter `{name}`")))?;
        Ok(self.param(name, t))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = ops::matmul(self.value(a), self.value(b))?;
        let ng = self.ng(&[a, b]);
        Ok(self.push(v, Op::MatMul(a, b), ng))
    }

    /// `a * b^T`.
    pub fn matmul_t(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = ops::matmul_t(self.value(a), self.value(b))?;
        let ng = self.ng(&[a, b]);
        Ok(self.push(v, Op::MatMulT(a, b), ng))
    }

    pub fn add_row(&mut self, x: NodeId, b: NodeId) -> Result<NodeId> {
        let v = ops::add_row(self.value(x), self.value(b))?;
        let ng = self.ng(&[x, b]);
        Ok(self.push(v, Op::AddRow(x, b), ng))
    }

    /// `x W (+ b)`.
    pub fn linear(&mut self, x: NodeId, w: NodeId, b: Option<NodeId>) -> Result<NodeId> {
        let y = self.matmul(x, w)?;
        match b {
            Some(b) => self.add_row(y, b),
            None => Ok(y),
        }
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = ops::add(self.value(a), self.value(b))?;
        let ng = self.ng(&[a, b]);
        Ok(self.push(v, Op::Add(a, b), ng))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = ops::sub(self.value(a), self.value(b))?;
        let ng = self.ng(&[a, b]);
        Ok(self.push(v, Op::Sub(a, b), ng))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = ops::mul(self.value(a), self.value(b))?;
        let ng = self.ng(&[a, b]);
        Ok(self.push(v, Op::Mul(a, b), ng))
    }

    pub fn scale(&mut self, x: NodeId, factor: f64) -> NodeId {
        let v = self.value(x).map(|e| e * factor);
        let ng = self.ng(&[x]);
        self.push(v, Op::Scale(x, factor), ng)
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let v = ops::relu(self.value(x));
        let ng = self.ng(&[x]);
        self.push(v, Op::Relu(x), ng)
    }

    pub fn softmax_rows(&mut self, x: NodeId) -> NodeId {
        let v = ops::softmax_rows(self.value(x));
        let ng = self.ng(&[x]);
        self.push(v, Op::SoftmaxRows(x), ng)
    }

    pub fn log_softmax_rows(&mut self, x: NodeId) -> NodeId {
        let v = ops::log_softmax_rows(self.value(x));
        let ng = self.ng(&[x]);
        self.push(v, Op::LogSoftmaxRows(x), ng)
    }

    pub fn layer_norm_rows(&mut self, x: NodeId, gamma: NodeId, beta: NodeId) -> Result<NodeId> {
        let v = ops::layer_norm_rows(self.value(x), self.value(gamma), self.value(beta), ops::LAYER_NORM_EPS)?;
        let ng = self.ng(&[x, gamma, beta]);
        Ok(self.push(v, Op::LayerNormRows { x, gamma, beta }, ng))
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let vals: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let v = ops::concat_cols(&vals)?;
        let ng = self.ng(parts);
        Ok(self.push(v, Op::ConcatCols(parts.to_vec()), ng))
    }

    pub fn sum_rows(&mut self, x: NodeId) -> NodeId {
        let v = ops::sum_rows(self.value(x));
        let ng = self.ng(&[x]);
        self.push(v, Op::SumRows(x), ng)
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let v = Tensor::scalar(self.value(x).data().iter().sum());
        let ng = self.ng(&[x]);
        self.push(v, Op::Sum(x), ng)
    }

    pub fn mean(&mut self, x: NodeId) -> NodeId {
        let t = self.value(x);
        let v = Tensor::scalar(t.data().iter().sum::<f64>() / t.len() as f64);
        let ng = self.ng(&[x]);
        self.push(v, Op::Mean(x), ng)
    }

    /// `sum((a - b)^2)` as a scalar.
    pub fn squared_error(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let d = ops::sub(self.value(a), self.value(b))?;
        let v = Tensor::scalar(d.data().iter().map(|e| e * e).sum());
        let ng = self.ng(&[a, b]);
        Ok(self.push(v, Op::SquaredError(a, b), ng))
    }

    pub fn l2_norm(&mut self, x: NodeId) -> NodeId {
        let v = Tensor::scalar(ops::l2_norm(self.value(x).data()));
        let ng = self.ng(&[x]);
        self.push(v, Op::L2Norm(x), ng)
    }

    /// Cosine similarity of two flattened tensors; zero when either norm is zero.
    pub fn cosine(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.len() != tb.len() {
            return Err(Error::Dimension {
                op: "cosine",
                left: ta.shape().to_vec(),
                right: tb.shape().to_vec(),
            });
        }
        let v = Tensor::scalar(ops::cosine_similarity(ta.data(), tb.data()));
        let ng = self.ng(&[a, b]);
        Ok(self.push(v, Op::Cosine(a, b), ng))
    }

    /// Reverse sweep from a scalar `loss`, returning gradients for every
    /// trainable leaf reachable from it.
    pub fn backward(&self, loss: NodeId) -> Result<GradientMap> {
        if self.value(loss).len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(gy) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            if node.param.is_some() {
                // Trainable leaves keep their gradient for collection below.
                grads[idx] = Some(gy);
                continue;
            }
            self.propagate(node, &gy, &mut grads)?;
        }

        let mut out = GradientMap::new();
        for (name, id) in &self.params {
            if id.0 > loss.0 {
                continue;
            }
            let shape = self.value(*id).shape().to_vec();
            let g = grads[id.0].take().unwrap_or_else(|| vec![0.0; shape.iter().product()]);
            out.insert(name.clone(), Tensor::from_raw(shape, g));
        }
        Ok(out)
    }

    fn propagate(&self, node: &Node, gy: &[f64], grads: &mut [Option<Vec<f64>>]) -> Result<()> {
        let mut acc = |id: NodeId, g: Vec<f64>| {
            if !self.nodes[id.0].needs_grad {
                return;
            }
            match &mut grads[id.0] {
                Some(existing) => {
                    for (e, v) in existing.iter_mut().zip(g) {
                        *e += v;
                    }
                }
                slot @ None => *slot = Some(g),
            }
        };
        let y = &node.value;
        let gy_t = || Tensor::from_raw(y.shape().to_vec(), gy.to_vec());
        let needs = |id: NodeId| self.nodes[id.0].needs_grad;

        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let g = gy_t();
                if needs(*a) {
                    acc(*a, ops::matmul_t(&g, self.value(*b))?.into_data());
                }
                if needs(*b) {
                    acc(*b, ops::t_matmul(self.value(*a), &g)?.into_data());
                }
            }
            Op::MatMulT(a, b) => {
                let g = gy_t();
                if needs(*a) {
                    acc(*a, ops::matmul(&g, self.value(*b))?.into_data());
                }
                if needs(*b) {
                    acc(*b, ops::t_matmul(&g, self.value(*a))?.into_data());
                }
            }
            Op::AddRow(x, b) => {
                acc(*x, gy.to_vec());
                if needs(*b) {
                    let c = y.cols();
                    let mut gb = vec![0.0; c];
                    for row in gy.chunks(c) {
                        for (s, v) in gb.iter_mut().zip(row) {
                            *s += v;
                        }
                    }
                    acc(*b, gb);
                }
            }
            Op::Add(a, b) => {
                acc(*a, gy.to_vec());
                acc(*b, gy.to_vec());
            }
            Op::Sub(a, b) => {
                acc(*a, gy.to_vec());
                acc(*b, gy.iter().map(|v| -v).collect());
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                if needs(*a) {
                    acc(*a, gy.iter().zip(vb).map(|(g, v)| g * v).collect());
                }
                if needs(*b) {
                    acc(*b, gy.iter().zip(va).map(|(g, v)| g * v).collect());
                }
            }
            Op::Scale(x, f) => acc(*x, gy.iter().map(|g| g * f).collect()),
            Op::Relu(x) => {
                let vx = self.value(*x).data();
                acc(
                    *x,
                    gy.iter()
                        .zip(vx)
                        .map(|(g, &v)| if v > 0.0 { *g } else { 0.0 })
                        .collect(),
                );
            }
            Op::SoftmaxRows(x) => {
                let c = y.cols();
                let mut gx = vec![0.0; gy.len()];
                for ((o, yr), gr) in gx.chunks_mut(c).zip(y.data().chunks(c)).zip(gy.chunks(c)) {
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for ((o, &yv), &gv) in o.iter_mut().zip(yr).zip(gr) {
                        *o = yv * (gv - dot);
                    }
                }
                acc(*x, gx);
            }
            Op::LogSoftmaxRows(x) => {
                let c = y.cols();
                let mut gx = vec![0.0; gy.len()];
                for ((o, yr), gr) in gx.chunks_mut(c).zip(y.data().chunks(c)).zip(gy.chunks(c)) {
                    let total: f64 = gr.iter().sum();
                    for ((o, &ly), &gv) in o.iter_mut().zip(yr).zip(gr) {
                        *o = gv - ly.exp() * total;
                    }
                }
                acc(*x, gx);
            }
            Op::LayerNormRows { x, gamma, beta } => {
                let vx = self.value(*x);
                let g = self.value(*gamma).data();
                let c = vx.cols();
                let n = c as f64;
                let mut gx = vec![0.0; vx.len()];
                let mut gg = vec![0.0; c];
                let mut gb = vec![0.0; c];
                for (r, xr) in vx.data().chunks(c).enumerate() {
                    let (mean, inv) = ops::row_stats(xr, ops::LAYER_NORM_EPS);
                    let gr = &gy[r * c..(r + 1) * c];
                    let xhat: Vec<f64> = xr.iter().map(|v| (v - mean) * inv).collect();
                    let dxhat: Vec<f64> = gr.iter().zip(g).map(|(a, b)| a * b).collect();
                    let s1: f64 = dxhat.iter().sum();
                    let s2: f64 = dxhat.iter().zip(&xhat).map(|(a, b)| a * b).sum();
                    for k in 0..c {
                        gg[k] += gr[k] * xhat[k];
                        gb[k] += gr[k];
                        gx[r * c + k] = inv / n * (n * dxhat[k] - s1 - xhat[k] * s2);
                    }
                }
                acc(*x, gx);
                acc(*gamma, gg);
                acc(*beta, gb);
            }
            Op::ConcatCols(parts) => {
                let total = y.cols();
                let mut offset = 0;
                for &p in parts {
                    let pc = self.value(p).cols();
                    if needs(p) {
                        let g = gy
                            .chunks(total)
                            .flat_map(|row| row[offset..offset + pc].iter().copied())
                            .collect();
                        acc(p, g);
                    }
                    offset += pc;
                }
            }
            Op::SumRows(x) => {
                let c = self.value(*x).cols();
                acc(*x, gy.iter().flat_map(|&g| std::iter::repeat_n(g, c)).collect());
            }
            Op::Sum(x) => acc(*x, vec![gy[0]; self.value(*x).len()]),
            Op::Mean(x) => {
                let n = self.value(*x).len();
                acc(*x, vec![gy[0] / n as f64; n]);
            }
            Op::SquaredError(a, b) => {
                let d: Vec<f64> = self
                    .value(*a)
                    .data()
                    .iter()
                    .zip(self.value(*b).data())
                    .map(|(x, z)| 2.0 * (x - z) * gy[0])
                    .collect();
                if needs(*b) {
                    acc(*b, d.iter().map(|v| -v).collect());
                }
                acc(*a, d);
            }
            Op::L2Norm(x) => {
                let norm = y.item();
                let vx = self.value(*x).data();
                let g = if norm == 0.0 {
                    vec![0.0; vx.len()]
                } else {
                    vx.iter().map(|v| v / norm * gy[0]).collect()
                };
                acc(*x, g);
            }
            Op::Cosine(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                let (na, nb) = (ops::l2_norm(va), ops::l2_norm(vb));
                let c = y.item();
                let zero = na == 0.0 || nb == 0.0;
                let grad_for = |u: &[f64], w: &[f64], nu: f64, nw: f64| -> Vec<f64> {
                    if zero {
                        return vec![0.0; u.len()];
                    }
                    u.iter()
                        .zip(w)
                        .map(|(&ui, &wi)| (wi / (nu * nw) - c * ui / (nu * nu)) * gy[0])
                        .collect()
                };
                if needs(*a) {
                    acc(*a, grad_for(va, vb, na, nb));
                }
                if needs(*b) {
                    acc(*b, grad_for(vb, va, nb, na));
                }
            }
        }
        Ok(())
    }
}
