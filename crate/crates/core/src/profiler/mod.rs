//! Sparse cascade profiling, subtree fill-in and profiling-cost accounting.

mod coverage;
mod fill;
mod ledger;

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

pub use coverage::{coverage_stats, CoverageStats, DepthCoverage, HISTOGRAM_EDGES};
pub use fill::{subtree_fill_in, Cell, FilledTable, Provenance};
pub use ledger::{checkpoint_cost_accounting, CostLedger, LedgerRow, Regime};

use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::trie::{ExecutionTrie, NodeId};
use crate::workload::{GroundTruthWorld, RequestId};

/// One profiled stage: `outcome` is the stage's own result given that every
/// earlier stage on its prefix failed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Entry {
    pub outcome: bool,
    pub cost: f64,
    pub latency: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Budget {
    /// Fraction of checkpointed full-profiling dollars, in `(0, 1]`.
    Coverage(f64),
    /// Number of cascade runs.
    Runs(u64),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObservationSet {
    entries: BTreeMap<(RequestId, NodeId), Entry>,
    /// Dollars of the invocations actually paid (first visits only).
    pub spent: f64,
    pub runs: u64,
    pub seed: u64,
}

impl ObservationSet {
    pub fn new(seed: u64) -> Self {
        ObservationSet { seed, ..Default::default() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Paid invocations; revisits of a checkpointed stage are free.
    pub fn invocations(&self) -> u64 {
        self.entries.len() as u64
    }

    pub fn get(&self, q: RequestId, node: NodeId) -> Option<&Entry> {
        self.entries.get(&(q, node))
    }

    /// Entries in `(request, node)` order.
    pub fn iter(&self) -> impl Iterator<Item = (RequestId, NodeId, &Entry)> + '_ {
        self.entries.iter().map(|(&(q, n), e)| (q, n, e))
    }

    /// Records a stage result; returns whether it was new.
    pub fn insert(&mut self, q: RequestId, node: NodeId, entry: Entry) -> bool {
        if self.entries.contains_key(&(q, node)) {
            return false;
        }
        self.spent += entry.cost;
        self.entries.insert((q, node), entry);
        true
    }

    /// Every stage every request reaches: checkpointed full profiling.
    pub fn exhaustive(world: &GroundTruthWorld) -> Self {
        let s = world.structure();
        let mut obs = ObservationSet::new(world.seed());
        for q in world.request_ids() {
            let mut done = vec![false; s.len()];
            for id in s.ids().skip(1) {
                let parent = s.node(id).parent.expect("non-root");
                if done[parent.index()] {
                    done[id.index()] = true;
                    continue;
                }
                let e = observe(world, q, id);
                done[id.index()] = e.outcome;
                obs.insert(q, id, e);
            }
        }
        obs
    }

    /// Checks the cascade-reachability invariant: every entry below depth 1
    /// has entries with failed outcomes at all its ancestors.
    pub fn check_reachability(&self, trie: &ExecutionTrie) -> Result<()> {
        for &(q, node) in self.entries.keys() {
            let mut p = trie.node(node).parent;
            while let Some(id) = p.filter(|&id| id != NodeId::ROOT) {
                match self.entries.get(&(q, id)) {
                    Some(e) if !e.outcome => {}
                    _ => {
                        return Err(Error::Malformed {
                            field: format!("request {q} prefix {}", trie.prefix_key(node)),
                            message: format!("ancestor {} is missing or succeeded", trie.prefix_key(id)),
                        })
                    }
                }
                p = trie.node(id).parent;
            }
        }
        Ok(())
    }

    /// Line-delimited JSON, one record per entry in `(request, node)` order.
    pub fn write_jsonl(&self, trie: &ExecutionTrie, mut out: impl Write) -> Result<()> {
        for (&(q, node), e) in &self.entries {
            let rec = Record {
                request_id: q,
                prefix: trie.prefix_key(node),
                outcome: u8::from(e.outcome),
                cost: e.cost,
                latency: e.latency,
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl(trie: &ExecutionTrie, input: impl BufRead) -> Result<Self> {
        let mut obs = ObservationSet::default();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(&line).map_err(|e| Error::Malformed {
                field: format!("line {}", i + 1),
                message: e.to_string(),
            })?;
            if rec.outcome > 1 {
                return Err(Error::Malformed { field: format!("line {}.outcome", i + 1), message: "must be 0 or 1".into() });
            }
            let node = trie.find_key(&rec.prefix)?;
            if node == NodeId::ROOT {
                return Err(Error::UnknownPrefix(String::new()));
            }
            obs.insert(rec.request_id, node, Entry { outcome: rec.outcome == 1, cost: rec.cost, latency: rec.latency });
        }
        obs.check_reachability(trie)?;
        Ok(obs)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    request_id: RequestId,
    prefix: String,
    outcome: u8,
    cost: f64,
    latency: f64,
}

fn observe(world: &GroundTruthWorld, q: RequestId, node: NodeId) -> Entry {
    Entry {
        outcome: world.node_outcome(q, node),
        cost: world.stage_cost(q, node),
        latency: world.stage_latency(q, node),
    }
}

/// Runs budget-limited cascade profiling.
///
/// Each run draws a request uniformly and a uniform admissible model at each
/// depth, descending while the current stage fails. Stages already profiled
/// for that request are reused for free. Profiling stops once the dollar
/// budget is spent, the run budget is used, or every reachable stage has been
/// profiled.
pub fn cascade_sample(world: &GroundTruthWorld, budget: Budget, seed: u64) -> Result<ObservationSet> {
    let s = world.structure();
    let (dollars, max_runs) = match budget {
        Budget::Coverage(c) => {
            if !(c > 0.0 && c <= 1.0) {
                return Err(Error::InvalidArgument(format!("coverage {c} is outside (0, 1]")));
            }
            let full = checkpoint_cost_accounting(world, Regime::CheckpointedFull, None);
            (c * full.dollars, u64::MAX)
        }
        Budget::Runs(0) => return Err(Error::InvalidArgument("run budget must be positive".into())),
        Budget::Runs(n) => (f64::INFINITY, n),
    };
    let reachable = checkpoint_cost_accounting(world, Regime::CheckpointedFull, None).invocations;
    let nq = world.num_requests() as f64;
    let mut obs = ObservationSet::new(seed);
    while obs.runs < max_runs && obs.spent < dollars && obs.invocations() < reachable {
        let r = obs.runs;
        obs.runs += 1;
        let q = ((rng::unit(rng::key(seed, Stream::Cascade, r, 0)) * nq) as RequestId).min(world.num_requests() as RequestId - 1);
        let mut node = NodeId::ROOT;
        for depth in 1..=s.max_depth() {
            let children = &s.node(node).children;
            let pick = (rng::unit(rng::key(seed, Stream::Cascade, r, depth as u64)) * children.len() as f64) as usize;
            node = children[pick.min(children.len() - 1)].1;
            let e = match obs.get(q, node) {
                Some(e) => *e,
                None => {
                    let e = observe(world, q, node);
                    obs.insert(q, node, e);
                    e
                }
            };
            if e.outcome {
                break;
            }
        }
    }
    Ok(obs)
}
