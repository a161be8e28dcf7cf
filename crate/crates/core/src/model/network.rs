use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{load_sidecar, save_sidecar, Ablation, ModelConfig};
use super::hypothesis::{HostHypothesis, Phase};
use crate::data::Scene;
use crate::dynamics::behavior::ConstantVelocity;
use crate::dynamics::DynamicsConfig;
use crate::error::{Error, Result};
use crate::hypergraph::{cosine_affinity, infer_topology, HyperedgeGroups, TopologyDump, TopologyRegistry};
use crate::numerics::{Graph, NodeId, ParamStore, Tensor};

/// Added to attention scores of non-neighbours.
const MASKED: f64 = -1e9;

/// Predicted futures of one ambient vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSet {
    pub vehicle_id: u64,
    /// `M` trajectories of `T_p` positions in the scene frame (m).
    pub trajectories: Vec<Vec<[f64; 2]>>,
    pub probabilities: Vec<f64>,
}

impl ModeSet {
    pub fn num_modes(&self) -> usize {
        self.trajectories.len()
    }

    /// Index of the most probable mode; ties go to the lowest index.
    pub fn most_likely(&self) -> usize {
        let mut best = 0;
        for (m, p) in self.probabilities.iter().enumerate() {
            if *p > self.probabilities[best] {
                best = m;
            }
        }
        best
    }
}

/// Result of a forward pass, still attached to its graph.
#[derive(Debug, Clone)]
pub struct Forward {
    /// Per mode: `A x 2T_p` positions, columns `x1, y1, x2, y2, ...`.
    pub trajectories: Vec<NodeId>,
    /// `A x M` confidence logits.
    pub logits: Option<NodeId>,
    pub probabilities: Option<NodeId>,
    /// Per layer: `N x N` attention weights.
    pub attention: Vec<NodeId>,
    pub topology: TopologyDump,
    pub groups: HyperedgeGroups,
}

/// Predictions for every ambient vehicle of a scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub modes: Vec<ModeSet>,
    pub topology: TopologyDump,
}

/// The hypergraph-transformer predictor: configuration plus parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: ModelConfig,
    params: ParamStore,
}

/// `(name, shape, fan_in)` of every parameter; biases share the fan-in of
/// their weight.
fn layout(cfg: &ModelConfig) -> Vec<(String, Vec<usize>, usize)> {
    let d = cfg.d_model;
    let hist_in = 2 * cfg.history_len + 2;
    let host_in = 2 * cfg.future_len;
    let mut out = Vec::new();
    let lin = |out: &mut Vec<_>, name: String, i: usize, o: usize, bias: bool| {
        out.push((format!("{name}.w"), vec![i, o], i));
        if bias {
            out.push((format!("{name}.b"), vec![o], i));
        }
    };
    lin(&mut out, "hist.l1".into(), hist_in, d, true);
    lin(&mut out, "hist.l2".into(), d, d, true);
    lin(&mut out, "host.l1".into(), host_in, d, true);
    lin(&mut out, "host.l2".into(), d, d, true);
    for l in 0..cfg.layers {
        for p in ["q_n", "q_h", "k_n", "k_h", "v_n", "v_h"] {
            lin(&mut out, format!("layer{l}.{p}"), d, d, false);
        }
        lin(&mut out, format!("layer{l}.ffn1"), d, 4 * d, true);
        lin(&mut out, format!("layer{l}.ffn2"), 4 * d, d, true);
        lin(&mut out, format!("layer{l}.msg"), 2 * d, d, false);
        lin(&mut out, format!("layer{l}.edge"), d, d, true);
    }
    for m in 0..cfg.modes {
        lin(&mut out, format!("dec{m}.l1"), 3 * d, d, true);
        lin(&mut out, format!("dec{m}.traj"), d, 2 * cfg.future_len, true);
        lin(&mut out, format!("dec{m}.logit"), d, 1, true);
    }
    out
}

fn norm_names(cfg: &ModelConfig) -> Vec<String> {
    (0..cfg.layers)
        .flat_map(|l| [format!("layer{l}.ln_node"), format!("layer{l}.ln_edge")])
        .collect()
}

impl Model {
    /// Seeded initialization: weights uniform in `±sqrt(1/fan_in)`, layer
    /// norms at identity, confidence heads at zero so modes start equally
    /// likely.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        for (name, shape, fan_in) in layout(&config) {
            if name.contains(".logit.") || name.contains(".traj.") {
                params.init_const(&name, &shape, 0.0);
            } else {
                params.init_uniform(&name, &shape, fan_in, &mut rng);
            }
        }
        for n in norm_names(&config) {
            params.init_const(&format!("{n}.g"), &[config.d_model], 1.0);
            params.init_const(&format!("{n}.b"), &[config.d_model], 0.0);
        }
        Ok(Self { config, params })
    }

    /// Wraps existing parameters after checking names and shapes.
    pub fn from_parts(config: ModelConfig, params: ParamStore) -> Result<Self> {
        config.validate()?;
        let mut expected: Vec<(String, Vec<usize>)> = layout(&config).into_iter().map(|(n, s, _)| (n, s)).collect();
        for n in norm_names(&config) {
            expected.push((format!("{n}.g"), vec![config.d_model]));
            expected.push((format!("{n}.b"), vec![config.d_model]));
        }
        if expected.len() != params.len() {
            return Err(Error::Config(format!(
                "checkpoint holds {} tensors, configuration expects {}",
                params.len(),
                expected.len()
            )));
        }
        for (name, shape) in expected {
            match params.get(&name) {
                Some(t) if t.shape() == shape.as_slice() => {}
                Some(t) => {
                    return Err(Error::Config(format!(
                        "parameter `{name}` has shape {:?}, configuration expects {shape:?}",
                        t.shape()
                    )))
                }
                None => return Err(Error::Config(format!("checkpoint lacks parameter `{name}`"))),
            }
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Writes parameters and the hyperparameter sidecar.
    pub fn save(&self, checkpoint: &Path) -> Result<()> {
        self.params.save(checkpoint)?;
        save_sidecar(checkpoint, &self.config)
    }

    /// Loads a checkpoint; if `expected` is given, the sidecar must match it.
    pub fn load(checkpoint: &Path, expected: Option<&ModelConfig>) -> Result<Self> {
        let config = load_sidecar(checkpoint)?;
        if let Some(e) = expected {
            if *e != config {
                return Err(Error::Config(format!(
                    "checkpoint hyperparameters {config:?} differ from requested {e:?}"
                )));
            }
        }
        let params = ParamStore::load(checkpoint)?;
        Self::from_parts(config, params)
    }

    fn p(&self, g: &mut Graph, name: &str) -> Result<NodeId> {
        g.param_from(&self.params, name)
    }

    fn mlp(&self, g: &mut Graph, x: NodeId, prefix: &str) -> Result<NodeId> {
        let (w1, b1) = (
            self.p(g, &format!("{prefix}.l1.w"))?,
            self.p(g, &format!("{prefix}.l1.b"))?,
        );
        let (w2, b2) = (
            self.p(g, &format!("{prefix}.l2.w"))?,
            self.p(g, &format!("{prefix}.l2.b"))?,
        );
        let h = g.linear(x, w1, Some(b1))?;
        let h = g.relu(h);
        g.linear(h, w2, Some(b2))
    }

    /// History encoding: per vehicle, the window relative to its last
    /// position followed by that position, all divided by the scale.
    fn history_input(&self, history: &[Vec<[f64; 2]>]) -> Result<Tensor> {
        let th = self.config.history_len;
        let s = self.config.position_scale;
        let mut rows = Vec::with_capacity(history.len());
        for (i, h) in history.iter().enumerate() {
            if h.len() != th {
                return Err(Error::Contract(format!(
                    "vehicle row {i} has {} history frames, model expects {th}",
                    h.len()
                )));
            }
            let last = h[th - 1];
            let mut row: Vec<f64> = h
                .iter()
                .flat_map(|p| [(p[0] - last[0]) / s, (p[1] - last[1]) / s])
                .collect();
            row.extend([last[0] / s, last[1] / s]);
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Contract("scene has no vehicles".into()));
        }
        Ok(Tensor::from_rows(&rows))
    }

    fn host_input(&self, positions: &[[f64; 2]]) -> Result<Tensor> {
        if positions.len() != self.config.future_len {
            return Err(Error::Contract(format!(
                "host trajectory has {} frames, model expects {}",
                positions.len(),
                self.config.future_len
            )));
        }
        let s = self.config.position_scale;
        Ok(Tensor::from_rows(&[positions
            .iter()
            .flat_map(|p| [p[0] / s, p[1] / s])
            .collect()]))
    }

    /// `n^(0)`: `N x d` node features.
    pub fn embed_history_graph(&self, g: &mut Graph, history: &[Vec<[f64; 2]>]) -> Result<NodeId> {
        let x = g.constant(self.history_input(history)?);
        self.mlp(g, x, "hist")
    }

    /// `Z`: `1 x d` host embedding.
    pub fn embed_host_graph(&self, g: &mut Graph, positions: &[[f64; 2]]) -> Result<NodeId> {
        let x = g.constant(self.host_input(positions)?);
        self.mlp(g, x, "host")
    }

    pub fn embed_history(&self, history: &[Vec<[f64; 2]>]) -> Result<Tensor> {
        let mut g = Graph::new();
        let id = self.embed_history_graph(&mut g, history)?;
        Ok(g.value(id).clone())
    }

    /// Host embedding under the given protocol phase.
    pub fn embed_host(&self, host: &HostHypothesis, phase: Phase, strict: bool) -> Result<Tensor> {
        host.check_phase(phase, strict)?;
        let mut g = Graph::new();
        let id = self.embed_host_graph(&mut g, &host.positions)?;
        Ok(g.value(id).clone())
    }

    /// Full forward pass on `g`. The host embedding is built from
    /// `host_positions` exactly as given.
    pub fn forward(&self, g: &mut Graph, scene: &Scene, host_positions: &[[f64; 2]]) -> Result<Forward> {
        let cfg = &self.config;
        let d = cfg.d_model;
        let n = scene.num_vehicles();
        let a = scene.num_ambient();
        if scene.future.len() != n || scene.history.len() != n {
            return Err(Error::Contract("scene rows disagree with its vehicle list".into()));
        }

        let n0 = self.embed_history_graph(g, &scene.history)?;
        let affinity = cosine_affinity(g.value(n0));
        let topology = infer_topology(&affinity, cfg.tau)?;
        let builder = TopologyRegistry::builtin().get(cfg.builder_name())?;
        let groups = builder.build(&topology);
        let e = groups.num_hyperedges();

        // incident-hyperedge mean (N x E) and member mean (E x N)
        let (pmat, qmat) = if e > 0 {
            let mut p = vec![0.0; n * e];
            for i in 0..n {
                let inc = groups.incident(i);
                for &k in inc {
                    p[i * e + k] = 1.0 / inc.len() as f64;
                }
            }
            let mut q = vec![0.0; e * n];
            for (k, members) in groups.hyperedges().iter().enumerate() {
                for &i in members {
                    q[k * n + i] = 1.0 / members.len() as f64;
                }
            }
            (
                Some(g.constant(Tensor::matrix(n, e, p)?)),
                Some(g.constant(Tensor::matrix(e, n, q)?)),
            )
        } else {
            (None, None)
        };
        let mut mask = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if !topology.get(i, j) {
                    mask[i * n + j] = MASKED;
                }
            }
        }
        let mask = g.constant(Tensor::matrix(n, n, mask)?);

        let mut node = n0;
        let mut edge = match qmat {
            Some(q) => Some(g.matmul(q, n0)?),
            None => None,
        };
        let mut attention = Vec::with_capacity(cfg.layers);
        let inv_sqrt_d = 1.0 / (d as f64).sqrt();
        for l in 0..cfg.layers {
            let name = |s: &str| format!("layer{l}.{s}");
            let hbar = match (pmat, edge) {
                (Some(p), Some(h)) => g.matmul(p, h)?,
                _ => g.constant(Tensor::zeros(&[n, d])),
            };
            let mix = |g: &mut Graph, wn: &str, wh: &str| -> Result<NodeId> {
                let (wn, wh) = (
                    self.p(g, &name(&format!("{wn}.w")))?,
                    self.p(g, &name(&format!("{wh}.w")))?,
                );
                let a = g.matmul(node, wn)?;
                let b = g.matmul(hbar, wh)?;
                g.add(a, b)
            };
            let q = mix(g, "q_n", "q_h")?;
            let k = mix(g, "k_n", "k_h")?;
            let v = mix(g, "v_n", "v_h")?;
            let scores = g.matmul_t(q, k)?;
            let scores = g.scale(scores, inv_sqrt_d);
            let scores = g.add(scores, mask)?;
            let alpha = g.softmax_rows(scores);
            attention.push(alpha);
            let ctx = g.matmul(alpha, v)?;

            let (w1, b1) = (self.p(g, &name("ffn1.w"))?, self.p(g, &name("ffn1.b"))?);
            let (w2, b2) = (self.p(g, &name("ffn2.w"))?, self.p(g, &name("ffn2.b"))?);
            let h = g.linear(ctx, w1, Some(b1))?;
            let h = g.relu(h);
            let f = g.linear(h, w2, Some(b2))?;
            let res = g.add(node, f)?;
            let (lg, lb) = (self.p(g, &name("ln_node.g"))?, self.p(g, &name("ln_node.b"))?);
            node = g.layer_norm_rows(res, lg, lb)?;

            if let (Some(q), Some(h)) = (qmat, edge) {
                let agg = g.matmul(q, node)?;
                let cat = g.concat_cols(&[h, agg])?;
                let wm = self.p(g, &name("msg.w"))?;
                let m = g.matmul(cat, wm)?;
                let m = g.relu(m);
                let (we, be) = (self.p(g, &name("edge.w"))?, self.p(g, &name("edge.b"))?);
                let upd = g.linear(m, we, Some(be))?;
                let res = g.add(h, upd)?;
                let (lg, lb) = (self.p(g, &name("ln_edge.g"))?, self.p(g, &name("ln_edge.b"))?);
                edge = Some(g.layer_norm_rows(res, lg, lb)?);
            }
        }

        let dump = TopologyDump::new(&affinity, cfg.tau, &topology, &groups);
        if a == 0 {
            return Ok(Forward {
                trajectories: Vec::new(),
                logits: None,
                probabilities: None,
                attention,
                topology: dump,
                groups,
            });
        }

        let z = self.embed_host_graph(g, host_positions)?;
        let mut sel = vec![0.0; a * n];
        for r in 0..a {
            sel[r * n + r + 1] = 1.0;
        }
        let sel = g.constant(Tensor::matrix(a, n, sel)?);
        let ones = g.constant(Tensor::full(&[a, 1], 1.0));
        let nl = g.matmul(sel, node)?;
        let n0s = g.matmul(sel, n0)?;
        let zs = g.matmul(ones, z)?;
        let dec_in = g.concat_cols(&[nl, n0s, zs])?;

        let tp = cfg.future_len;
        let mut cum = vec![0.0; 4 * tp * tp];
        for k in 0..tp {
            for k2 in k..tp {
                for c in 0..2 {
                    cum[(2 * k + c) * 2 * tp + 2 * k2 + c] = 1.0;
                }
            }
        }
        let cum = g.constant(Tensor::matrix(2 * tp, 2 * tp, cum)?);
        let base: Vec<Vec<f64>> = (1..=a)
            .map(|i| {
                let p = scene.last_position(i);
                (0..tp).flat_map(|_| [p[0], p[1]]).collect()
            })
            .collect();
        let base = g.constant(Tensor::from_rows(&base));

        let mut trajectories = Vec::with_capacity(cfg.modes);
        let mut logit_cols = Vec::with_capacity(cfg.modes);
        for m in 0..cfg.modes {
            let name = |s: &str| format!("dec{m}.{s}");
            let (w1, b1) = (self.p(g, &name("l1.w"))?, self.p(g, &name("l1.b"))?);
            let h = g.linear(dec_in, w1, Some(b1))?;
            let h = g.relu(h);
            let (wt, bt) = (self.p(g, &name("traj.w"))?, self.p(g, &name("traj.b"))?);
            let off = g.linear(h, wt, Some(bt))?;
            let off = g.matmul(off, cum)?;
            let off = g.scale(off, cfg.position_scale);
            trajectories.push(g.add(off, base)?);
            let (wl, bl) = (self.p(g, &name("logit.w"))?, self.p(g, &name("logit.b"))?);
            logit_cols.push(g.linear(h, wl, Some(bl))?);
        }
        let logits = g.concat_cols(&logit_cols)?;
        let probabilities = g.softmax_rows(logits);
        Ok(Forward {
            trajectories,
            logits: Some(logits),
            probabilities: Some(probabilities),
            attention,
            topology: dump,
            groups,
        })
    }

    /// Reads mode sets off a finished forward pass.
    pub fn mode_sets(&self, g: &Graph, scene: &Scene, fwd: &Forward) -> Vec<ModeSet> {
        let Some(probs) = fwd.probabilities else {
            return Vec::new();
        };
        let probs = g.value(probs);
        scene
            .ambient_ids()
            .iter()
            .enumerate()
            .map(|(r, &id)| ModeSet {
                vehicle_id: id,
                trajectories: fwd
                    .trajectories
                    .iter()
                    .map(|&t| g.value(t).row(r).chunks(2).map(|c| [c[0], c[1]]).collect())
                    .collect(),
                probabilities: probs.row(r).to_vec(),
            })
            .collect()
    }

    /// Predicts every ambient vehicle. Under the kinematic ablation the
    /// evaluation host trajectory is replaced by a constant-velocity
    /// rollout.
    pub fn predict(&self, scene: &Scene, host: &HostHypothesis, phase: Phase, strict: bool) -> Result<Prediction> {
        host.check_phase(phase, strict)?;
        let replaced;
        let host = if phase == Phase::Eval && self.config.ablation == Ablation::Kinematic {
            replaced = HostHypothesis::from_behavior(scene, &ConstantVelocity, &DynamicsConfig::default())?;
            &replaced
        } else {
            host
        };
        let mut g = Graph::new();
        let fwd = self.forward(&mut g, scene, &host.positions)?;
        Ok(Prediction {
            modes: self.mode_sets(&g, scene, &fwd),
            topology: fwd.topology,
        })
    }
}
