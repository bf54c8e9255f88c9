use std::collections::BTreeMap;

use super::{FilledTable, ObservationSet};
use crate::trie::{ExecutionTrie, NodeId};

/// Lower edges of the per-column count histogram bins.
pub const HISTOGRAM_EDGES: [u64; 6] = [0, 1, 5, 21, 81, 121];

#[derive(Clone, Debug, PartialEq)]
pub struct DepthCoverage {
    pub depth: usize,
    pub columns: usize,
    /// Columns with at least one entry.
    pub observed_columns: usize,
    pub entries: u64,
    /// `histogram[i]` counts columns whose entry count lies in
    /// `[HISTOGRAM_EDGES[i], HISTOGRAM_EDGES[i + 1])`.
    pub histogram: [usize; 6],
}

impl DepthCoverage {
    pub fn column_fraction(&self) -> f64 {
        if self.columns == 0 {
            0.0
        } else {
            self.observed_columns as f64 / self.columns as f64
        }
    }

    /// Entries over all request-column cells of this depth.
    pub fn cell_density(&self, num_requests: usize) -> f64 {
        self.entries as f64 / (self.columns * num_requests) as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverageStats {
    pub depths: Vec<DepthCoverage>,
    /// Entry count per node id (root included, always 0).
    pub per_column: Vec<u64>,
}

impl CoverageStats {
    pub fn depth(&self, depth: usize) -> &DepthCoverage {
        &self.depths[depth - 1]
    }

    fn from_counts(trie: &ExecutionTrie, per_column: Vec<u64>) -> Self {
        let mut depths: BTreeMap<usize, DepthCoverage> = (1..=trie.max_depth())
            .map(|d| {
                (d, DepthCoverage { depth: d, columns: 0, observed_columns: 0, entries: 0, histogram: [0; 6] })
            })
            .collect();
        for id in trie.ids().skip(1) {
            let n = per_column[id.index()];
            let d = depths.get_mut(&trie.node(id).depth).expect("depth in range");
            d.columns += 1;
            d.entries += n;
            d.observed_columns += usize::from(n > 0);
            let bin = HISTOGRAM_EDGES.iter().rposition(|&e| n >= e).expect("edge 0");
            d.histogram[bin] += 1;
        }
        CoverageStats { depths: depths.into_values().collect(), per_column }
    }
}

/// Per-depth observed-column fractions and per-column entry counts of the
/// profiled stages.
pub fn coverage_stats(obs: &ObservationSet, trie: &ExecutionTrie) -> CoverageStats {
    let mut per_column = vec![0u64; trie.len()];
    for (_, node, _) in obs.iter() {
        per_column[node.index()] += 1;
    }
    CoverageStats::from_counts(trie, per_column)
}

impl CoverageStats {
    /// Same statistics over a filled table, fill-in cells included.
    pub fn of_filled(filled: &FilledTable, trie: &ExecutionTrie) -> Self {
        let per_column = trie.ids().map(|id: NodeId| filled.column(id).count() as u64).collect();
        CoverageStats::from_counts(trie, per_column)
    }
}
