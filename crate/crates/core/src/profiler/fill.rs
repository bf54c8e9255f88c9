use std::collections::BTreeMap;

use super::ObservationSet;
use crate::trie::{ExecutionTrie, NodeId};
use crate::workload::{GroundTruthWorld, RequestId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    /// The stage at this node was run for the request.
    Direct,
    /// Implied by an observed success at an ancestor.
    FillIn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cell {
    pub value: bool,
    pub provenance: Provenance,
}

/// Partially observed request-path success table `A(q, p)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FilledTable {
    /// Column-major so per-column scans are range queries.
    cells: BTreeMap<(NodeId, RequestId), Cell>,
}

impl FilledTable {
    pub fn get(&self, q: RequestId, node: NodeId) -> Option<Cell> {
        self.cells.get(&(node, q)).copied()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn insert(&mut self, q: RequestId, node: NodeId, cell: Cell) {
        self.cells.insert((node, q), cell);
    }

    /// `(request, node, cell)` in column-major order.
    pub fn iter(&self) -> impl Iterator<Item = (RequestId, NodeId, Cell)> + '_ {
        self.cells.iter().map(|(&(n, q), &c)| (q, n, c))
    }

    pub fn column(&self, node: NodeId) -> impl Iterator<Item = (RequestId, Cell)> + '_ {
        self.cells.range((node, 0)..=(node, RequestId::MAX)).map(|(&(_, q), &c)| (q, c))
    }

    /// Requests with at least one cell, ascending.
    pub fn requests(&self) -> Vec<RequestId> {
        let mut v: Vec<RequestId> = self.cells.keys().map(|&(_, q)| q).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// The complete table, every cell direct.
    pub fn from_truth(world: &GroundTruthWorld) -> Self {
        let s = world.structure();
        let mut t = FilledTable::default();
        for q in world.request_ids() {
            let mut done = vec![false; s.len()];
            for id in s.ids().skip(1) {
                let parent = s.node(id).parent.expect("non-root");
                done[id.index()] = done[parent.index()] || world.node_outcome(q, id);
                t.insert(q, id, Cell { value: done[id.index()], provenance: Provenance::Direct });
            }
        }
        t
    }
}

/// Builds the filled table from cascade observations.
///
/// Every profiled stage directly observes `A(q, u)`: its ancestors failed, so
/// success there is the first success on the prefix. A success additionally
/// marks every descendant as successful, which prefix closure makes exact.
pub fn subtree_fill_in(obs: &ObservationSet, trie: &ExecutionTrie) -> FilledTable {
    let mut t = FilledTable::default();
    for (q, node, e) in obs.iter() {
        t.insert(q, node, Cell { value: e.outcome, provenance: Provenance::Direct });
        if e.outcome {
            for v in node.0 + 1..trie.subtree_end(node).0 {
                t.insert(q, NodeId(v), Cell { value: true, provenance: Provenance::FillIn });
            }
        }
    }
    t
}
