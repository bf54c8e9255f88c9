use super::{Annotation, ExecutionTrie, NodeId, Support};
use crate::error::{Error, Result};
use crate::workload::TraceRecord;

#[derive(Clone, Copy, Default)]
struct Acc {
    through: u64,
    succ: u64,
    cost: f64,
    reach: u64,
    lat: f64,
}

/// Annotates a copy of `trie` from executed traces.
///
/// For node `p`, traces whose path passes through `p` contribute success
/// within the first `depth(p)` stages to `acc` and their spend truncated at
/// `p` to `cost`. `lat` sums, over the prefix, the mean latency of each stage
/// among traces that reached it (the configured mean when none did). Nodes no
/// trace passes through stay unannotated.
pub fn annotate_from_traces(trie: &ExecutionTrie, traces: &[TraceRecord]) -> Result<ExecutionTrie> {
    let mut acc = vec![Acc::default(); trie.len()];
    for t in traces {
        let mut id = NodeId::ROOT;
        let mut spent = 0.0;
        for (i, &m) in t.path.iter().enumerate() {
            id = trie.child(id, m).ok_or_else(|| Error::InfeasiblePath {
                position: i,
                reason: format!("trace for request {} leaves the trie", t.request_id),
            })?;
            let a = &mut acc[id.index()];
            spent += t.stage_cost[i];
            a.through += 1;
            a.succ += u64::from(t.success && t.stop_depth <= i + 1);
            a.cost += spent;
            if t.reached[i] {
                a.reach += 1;
                a.lat += t.stage_latency[i];
            }
        }
    }

    let mut out = trie.clone();
    out.clear_annotations();
    let mut lat_sum = vec![0.0; trie.len()];
    for id in trie.ids().skip(1) {
        let a = acc[id.index()];
        let parent = trie.node(id).parent.expect("non-root");
        let stage = if a.reach > 0 { a.lat / a.reach as f64 } else { trie.nominal_stage_latency(id) };
        lat_sum[id.index()] = lat_sum[parent.index()] + stage;
        if a.through == 0 {
            continue;
        }
        let n = a.through as f64;
        out.set_annotation(
            id,
            Some(Annotation {
                acc: a.succ as f64 / n,
                cost: a.cost / n,
                lat: lat_sum[id.index()],
                support: Support { n_acc: a.through, n_cost: a.through, n_lat: a.reach },
            }),
        );
    }
    Ok(out)
}
