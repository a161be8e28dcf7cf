use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::Arc;

use super::{HyperedgeGroups, TopologyMatrix};
use crate::error::{Error, Result};

/// Turns a binary topology into hyperedges.
pub trait HyperedgeBuilder: Send + Sync {
    fn name(&self) -> &'static str;
    fn build(&self, topology: &TopologyMatrix) -> HyperedgeGroups;
}

/// One hyperedge per vertex holding its topology row, duplicates merged.
#[derive(Debug, Default, Clone, Copy)]
pub struct RowHyperedges;

impl HyperedgeBuilder for RowHyperedges {
    fn name(&self) -> &'static str {
        "hypergraph"
    }

    fn build(&self, topology: &TopologyMatrix) -> HyperedgeGroups {
        let mut seen = HashSet::new();
        let mut edges = Vec::new();
        for i in 0..topology.size() {
            let members = topology.row_members(i);
            if seen.insert(members.clone()) {
                edges.push(members);
            }
        }
        HyperedgeGroups::new(topology.size(), edges).expect("rows always contain the diagonal")
    }
}

/// Ordinary graph edges: `{i, j}` for every `i < j` with `G_ij = 1`.
/// Vertices without neighbours end up with no incident edge.
#[derive(Debug, Default, Clone, Copy)]
pub struct PairwiseEdges;

impl HyperedgeBuilder for PairwiseEdges {
    fn name(&self) -> &'static str {
        "pairwise"
    }

    fn build(&self, topology: &TopologyMatrix) -> HyperedgeGroups {
        let n = topology.size();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if topology.get(i, j) || topology.get(j, i) {
                    edges.push(vec![i, j]);
                }
            }
        }
        HyperedgeGroups::new(n, edges).expect("pairs are non-empty")
    }
}

/// Hyperedge builders by name.
#[derive(Clone)]
pub struct TopologyRegistry {
    entries: BTreeMap<&'static str, Arc<dyn HyperedgeBuilder>>,
}

impl TopologyRegistry {
    pub fn builtin() -> Self {
        let mut r = Self {
            entries: BTreeMap::new(),
        };
        r.register(Arc::new(RowHyperedges));
        r.register(Arc::new(PairwiseEdges));
        r
    }

    pub fn register(&mut self, builder: Arc<dyn HyperedgeBuilder>) {
        self.entries.insert(builder.name(), builder);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn HyperedgeBuilder>> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| Error::Config(format!("unknown hyperedge builder `{name}`")))
    }
}

impl fmt::Debug for TopologyRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.entries.keys()).finish()
    }
}
