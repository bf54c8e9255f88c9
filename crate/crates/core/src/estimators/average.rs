use super::{ColumnMeanEstimate, Method};
use crate::profiler::{FilledTable, Provenance};
use crate::trie::ExecutionTrie;

fn column_average(filled: &FilledTable, trie: &ExecutionTrie, method: Method, direct_only: bool) -> ColumnMeanEstimate {
    let mut mu = vec![0.0; trie.len()];
    let mut fallback = 0;
    for id in trie.ids().skip(1) {
        let (mut n, mut ones) = (0u64, 0u64);
        for (_, c) in filled.column(id) {
            if direct_only && c.provenance != Provenance::Direct {
                continue;
            }
            n += 1;
            ones += u64::from(c.value);
        }
        mu[id.index()] = if n > 0 {
            ones as f64 / n as f64
        } else {
            fallback += 1;
            mu[trie.node(id).parent.expect("non-root").index()]
        };
    }
    ColumnMeanEstimate { mu, method, coverage: None, fallback_cells: fallback, residual: None }
}

/// Mean of the directly profiled cells of each column; columns without any
/// take their parent's estimate.
pub fn estimate_direct_average(filled: &FilledTable, trie: &ExecutionTrie) -> ColumnMeanEstimate {
    column_average(filled, trie, Method::Direct, true)
}

/// Mean of direct and filled-in cells of each column.
pub fn estimate_prefix_avg(filled: &FilledTable, trie: &ExecutionTrie) -> ColumnMeanEstimate {
    column_average(filled, trie, Method::PrefixAvg, false)
}
