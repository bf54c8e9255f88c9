//! Fixtures shared by the criterion benches in `benches/`.

use trieflow_core::workload::presets;
use trieflow_core::{Annotation, ExecutionTrie};

/// Annotates every node with a fixed conditional success rate and the
/// catalog's nominal stage costs and latencies.
pub fn nominal(mut trie: ExecutionTrie, rate: f64) -> ExecutionTrie {
    let ids: Vec<_> = trie.ids().skip(1).collect();
    for id in ids {
        let parent = trie.node(id).parent.expect("non-root");
        let (pa, pc, pl) = trie.metrics(parent).unwrap_or((0.0, 0.0, 0.0));
        let a = Annotation {
            acc: pa + (1.0 - pa) * rate,
            cost: pc + (1.0 - pa) * trie.nominal_stage_cost(id),
            lat: pl + trie.nominal_stage_latency(id),
            support: Default::default(),
        };
        trie.set_annotation(id, Some(a));
    }
    trie
}

/// Four models, depth six (5460 paths).
pub fn four_by_six() -> ExecutionTrie {
    let (t, c) = presets::four_by_six_shape();
    nominal(ExecutionTrie::build(&t, &c).expect("preset builds"), 0.3)
}

/// Two models, depth four (30 paths).
pub fn two_by_four() -> ExecutionTrie {
    let (t, c) = presets::two_by_four_shape();
    nominal(ExecutionTrie::build(&t, &c).expect("preset builds"), 0.3)
}
