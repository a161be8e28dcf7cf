//! Hypergraph topology inference from latent node features.
//!
//! Cosine affinities between node features are thresholded into a binary
//! topology; a [`HyperedgeBuilder`] then materializes hyperedges from it.

mod builders;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::ops::cosine_similarity;
use crate::numerics::Tensor;

pub use builders::{HyperedgeBuilder, PairwiseEdges, RowHyperedges, TopologyRegistry};

/// Default affinity threshold.
pub const DEFAULT_TAU: f64 = 0.5;

/// Symmetric `N x N` matrix of cosine similarities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinityMatrix {
    n: usize,
    values: Vec<f64>,
}

impl AffinityMatrix {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.values.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Domain("affinity matrix must be square".into()));
        }
        Ok(Self {
            n,
            values: rows.concat(),
        })
    }
}

/// Binary `N x N` topology; `G_ii = 1` always.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyMatrix {
    n: usize,
    cells: Vec<bool>,
}

impl TopologyMatrix {
    pub fn identity(n: usize) -> Self {
        let mut cells = vec![false; n * n];
        for i in 0..n {
            cells[i * n + i] = true;
        }
        Self { n, cells }
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Self {
        let n = rows.len();
        Self {
            n,
            cells: rows.iter().flatten().map(|&v| v != 0).collect(),
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[i * self.n + j]
    }

    pub fn row_members(&self, i: usize) -> Vec<usize> {
        (0..self.n).filter(|&j| self.get(i, j)).collect()
    }

    pub fn rows(&self) -> Vec<Vec<u8>> {
        self.cells
            .chunks(self.n)
            .map(|r| r.iter().map(|&b| u8::from(b)).collect())
            .collect()
    }
}

/// Binary `|V| x |E|` membership matrix with no empty columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix {
    vertices: usize,
    edges: usize,
    cells: Vec<bool>,
}

impl IncidenceMatrix {
    pub fn from_columns(vertices: usize, columns: &[Vec<usize>]) -> Result<Self> {
        let edges = columns.len();
        let mut cells = vec![false; vertices * edges];
        for (e, members) in columns.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::Domain(format!("hyperedge {e} is empty")));
            }
            for &v in members {
                if v >= vertices {
                    return Err(Error::Domain(format!("vertex {v} out of range in hyperedge {e}")));
                }
                cells[v * edges + e] = true;
            }
        }
        Ok(Self { vertices, edges, cells })
    }

    pub fn vertices(&self) -> usize {
        self.vertices
    }

    pub fn edges(&self) -> usize {
        self.edges
    }

    pub fn get(&self, v: usize, e: usize) -> bool {
        self.cells[v * self.edges + e]
    }
}

/// Hyperedge member lists and the per-vertex incidence lists derived from them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HyperedgeGroups {
    vertices: usize,
    hyperedges: Vec<Vec<usize>>,
    incident: Vec<Vec<usize>>,
}

impl HyperedgeGroups {
    /// Builds groups from member lists; members are sorted and deduplicated.
    pub fn new(vertices: usize, hyperedges: Vec<Vec<usize>>) -> Result<Self> {
        let mut incident = vec![Vec::new(); vertices];
        let mut clean = Vec::with_capacity(hyperedges.len());
        for (e, mut members) in hyperedges.into_iter().enumerate() {
            members.sort_unstable();
            members.dedup();
            if members.is_empty() {
                return Err(Error::Domain(format!("hyperedge {e} is empty")));
            }
            for &v in &members {
                if v >= vertices {
                    return Err(Error::Domain(format!("vertex {v} out of range in hyperedge {e}")));
                }
                incident[v].push(e);
            }
            clean.push(members);
        }
        Ok(Self {
            vertices,
            hyperedges: clean,
            incident,
        })
    }

    pub fn vertices(&self) -> usize {
        self.vertices
    }

    pub fn hyperedges(&self) -> &[Vec<usize>] {
        &self.hyperedges
    }

    pub fn num_hyperedges(&self) -> usize {
        self.hyperedges.len()
    }

    /// Hyperedges containing vertex `v`.
    pub fn incident(&self, v: usize) -> &[usize] {
        &self.incident[v]
    }

    pub fn incidence(&self) -> IncidenceMatrix {
        IncidenceMatrix::from_columns(self.vertices, &self.hyperedges).expect("groups are validated at construction")
    }
}

/// Pairwise cosine similarities of the rows of `features` (`N x d`).
///
/// Rows with zero norm have affinity 0 to every other row and 1 to
/// themselves.
pub fn cosine_affinity(features: &Tensor) -> AffinityMatrix {
    let n = features.rows();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
        for j in i + 1..n {
            let c = cosine_similarity(features.row(i), features.row(j));
            values[i * n + j] = c;
            values[j * n + i] = c;
        }
    }
    AffinityMatrix { n, values }
}

/// `G_ij = 1` iff `A_ij >= tau`.
pub fn infer_topology(affinity: &AffinityMatrix, tau: f64) -> Result<TopologyMatrix> {
    if !(-1.0..=1.0).contains(&tau) {
        return Err(Error::Config(format!("threshold tau = {tau} outside [-1, 1]")));
    }
    let n = affinity.n;
    let mut cells: Vec<bool> = affinity.values.iter().map(|&a| a >= tau).collect();
    for i in 0..n {
        cells[i * n + i] = true;
    }
    Ok(TopologyMatrix { n, cells })
}

/// Row-as-hyperedge construction with exact duplicates merged.
pub fn groups_from_topology(g: &TopologyMatrix) -> (HyperedgeGroups, IncidenceMatrix) {
    let groups = RowHyperedges.build(g);
    let inc = groups.incidence();
    (groups, inc)
}

/// `A_ij = sum_e H(i, e) H(j, e)`: number of shared hyperedges.
pub fn adjacency_from_incidence(h: &IncidenceMatrix) -> Vec<Vec<usize>> {
    let n = h.vertices;
    let mut a = vec![vec![0; n]; n];
    for e in 0..h.edges {
        let members: Vec<usize> = (0..n).filter(|&v| h.get(v, e)).collect();
        for &i in &members {
            for &j in &members {
                a[i][j] += 1;
            }
        }
    }
    a
}

/// Snapshot of the inferred structure, used by the scenario visualizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyDump {
    pub affinity: Vec<Vec<f64>>,
    pub tau: f64,
    pub topology: Vec<Vec<u8>>,
    pub hyperedges: Vec<Vec<usize>>,
}

impl TopologyDump {
    pub fn new(affinity: &AffinityMatrix, tau: f64, topology: &TopologyMatrix, groups: &HyperedgeGroups) -> Self {
        Self {
            affinity: affinity.rows(),
            tau,
            topology: topology.rows(),
            hyperedges: groups.hyperedges.clone(),
        }
    }
}
