use super::ColumnMeanEstimate;
use crate::profiler::ObservationSet;
use crate::trie::{Annotation, ExecutionTrie, Support};

/// Annotates a copy of `trie` with estimated accuracy.
///
/// Stage cost and latency are pooled per (depth, model) over the profiled
/// entries, falling back to the configured means. Spend is reach-discounted
/// with the estimated accuracy: `C(u) = C(parent) + (1 - mu(parent)) * cost`.
pub fn annotate_estimate(trie: &ExecutionTrie, est: &ColumnMeanEstimate, obs: &ObservationSet) -> ExecutionTrie {
    let nm = trie.models().len();
    let slot = |depth: usize, m: usize| depth * nm + m;
    let mut n = vec![0u64; (trie.max_depth() + 1) * nm];
    let mut cost = vec![0.0; n.len()];
    let mut lat = vec![0.0; n.len()];
    let mut column = vec![0u64; trie.len()];
    for (_, node, e) in obs.iter() {
        let t = trie.node(node);
        let k = slot(t.depth, t.model.expect("non-root").0 as usize);
        n[k] += 1;
        cost[k] += e.cost;
        lat[k] += e.latency;
        column[node.index()] += 1;
    }
    let mut out = trie.clone();
    out.clear_annotations();
    let mut c_sum = vec![0.0; trie.len()];
    let mut t_sum = vec![0.0; trie.len()];
    for id in trie.ids().skip(1) {
        let t = trie.node(id);
        let parent = t.parent.expect("non-root");
        let k = slot(t.depth, t.model.expect("non-root").0 as usize);
        let (stage_cost, stage_lat) = if n[k] > 0 {
            (cost[k] / n[k] as f64, lat[k] / n[k] as f64)
        } else {
            (trie.nominal_stage_cost(id), trie.nominal_stage_latency(id))
        };
        c_sum[id.index()] = c_sum[parent.index()] + (1.0 - est.get(parent)) * stage_cost;
        t_sum[id.index()] = t_sum[parent.index()] + stage_lat;
        out.set_annotation(
            id,
            Some(Annotation {
                acc: est.get(id).clamp(0.0, 1.0),
                cost: c_sum[id.index()],
                lat: t_sum[id.index()],
                support: Support { n_acc: column[id.index()], n_cost: n[k], n_lat: n[k] },
            }),
        );
    }
    out
}
