use super::rank1::{rank1_project, Block};
use super::{ColumnMeanEstimate, Method};
use crate::profiler::ObservationSet;
use crate::trie::{ExecutionTrie, ModelIdx, NodeId};

/// Conditional success rates `Q[u, l] = P(stage l succeeds | u failed)`,
/// stored per child node `u.l`. Row `u` ranges over the root and every
/// non-leaf prefix.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalMatrix {
    sums: Vec<f64>,
    counts: Vec<u64>,
}

impl ConditionalMatrix {
    /// Observed mean at `node`, if any entry landed there.
    pub fn cell(&self, node: NodeId) -> Option<f64> {
        let n = self.counts[node.index()];
        (n > 0).then(|| self.sums[node.index()] / n as f64)
    }

    pub fn count(&self, node: NodeId) -> u64 {
        self.counts[node.index()]
    }

    /// Block of rows at `depth - 1` by models at `depth`, as used for
    /// rank-1 smoothing. Returns row prefixes, column models and the block.
    pub fn block(&self, trie: &ExecutionTrie, depth: usize) -> (Vec<NodeId>, Vec<ModelIdx>, Block) {
        let rows: Vec<NodeId> = trie.ids().filter(|&id| trie.node(id).depth == depth - 1).collect();
        let mut cols: Vec<ModelIdx> =
            rows.iter().flat_map(|&r| trie.node(r).children.iter().map(|&(m, _)| m)).collect();
        cols.sort();
        cols.dedup();
        let mut b = Block::new(rows.len(), cols.len());
        for (i, &r) in rows.iter().enumerate() {
            for &(m, child) in &trie.node(r).children {
                if let Some(v) = self.cell(child) {
                    b.set(i, cols.binary_search(&m).expect("collected"), v);
                }
            }
        }
        (rows, cols, b)
    }
}

/// Cell `(u, l)` is the mean outcome of the entries profiled at `u.l`.
pub fn build_conditional_matrix(obs: &ObservationSet, trie: &ExecutionTrie) -> ConditionalMatrix {
    let mut m = ConditionalMatrix { sums: vec![0.0; trie.len()], counts: vec![0; trie.len()] };
    for (_, node, e) in obs.iter() {
        m.sums[node.index()] += f64::from(u8::from(e.outcome));
        m.counts[node.index()] += 1;
    }
    m
}

/// `mu(u.l) = mu(u) + (1 - mu(u)) * Q[u, l]`, from the root down.
///
/// `q` holds the conditional rate per child node; `None` cells use the mean
/// of the available cells at the same depth (0 when there are none). Returns
/// the estimate and the number of cells that fell back.
pub fn recurse(trie: &ExecutionTrie, q: &[Option<f64>]) -> (Vec<f64>, usize) {
    let mut depth_sum = vec![0.0; trie.max_depth() + 1];
    let mut depth_n = vec![0usize; trie.max_depth() + 1];
    for id in trie.ids().skip(1) {
        if let Some(v) = q[id.index()] {
            let d = trie.node(id).depth;
            depth_sum[d] += v;
            depth_n[d] += 1;
        }
    }
    let mut mu = vec![0.0; trie.len()];
    let mut fallback = 0;
    for id in trie.ids().skip(1) {
        let n = trie.node(id);
        let cell = match q[id.index()] {
            Some(v) => v,
            None => {
                fallback += 1;
                if depth_n[n.depth] > 0 {
                    depth_sum[n.depth] / depth_n[n.depth] as f64
                } else {
                    0.0
                }
            }
        };
        let parent = mu[n.parent.expect("non-root").index()];
        mu[id.index()] = parent + (1.0 - parent) * cell.clamp(0.0, 1.0);
    }
    (mu, fallback)
}

/// Cascade decomposition with raw conditional means.
pub fn estimate_cascade_lite(obs: &ObservationSet, trie: &ExecutionTrie) -> ColumnMeanEstimate {
    let cm = build_conditional_matrix(obs, trie);
    let q: Vec<Option<f64>> = trie.ids().map(|id| cm.cell(id)).collect();
    let (mu, fallback_cells) = recurse(trie, &q);
    ColumnMeanEstimate { mu, method: Method::CascadeLite, coverage: None, fallback_cells, residual: None }
}

/// Cascade decomposition where each conditional block of depth 3 and deeper
/// is replaced by its rank-1 projection; depths 1 and 2 use raw means.
pub fn estimate_cascade_smoothed(obs: &ObservationSet, trie: &ExecutionTrie) -> ColumnMeanEstimate {
    let cm = build_conditional_matrix(obs, trie);
    let mut q: Vec<Option<f64>> = trie.ids().map(|id| cm.cell(id)).collect();
    let mut flagged = 0;
    for depth in 3..=trie.max_depth() {
        let (rows, cols, block) = cm.block(trie, depth);
        if !block.mask.iter().any(|&m| m) {
            continue;
        }
        let r = rank1_project(&block);
        flagged += r.flagged_columns.len();
        for (i, &row) in rows.iter().enumerate() {
            for &(m, child) in &trie.node(row).children {
                let j = cols.binary_search(&m).expect("collected");
                q[child.index()] = Some(r.completed.at(i, j));
            }
        }
    }
    let (mu, fallback) = recurse(trie, &q);
    ColumnMeanEstimate {
        mu,
        method: Method::CascadeSmoothed,
        coverage: None,
        fallback_cells: fallback + flagged,
        residual: None,
    }
}
