use std::io::Write;

use super::ObservationSet;
use crate::error::Result;
use crate::trie::NodeId;
use crate::workload::GroundTruthWorld;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    /// Every terminal path run from scratch for every request.
    NaiveFull,
    /// Every reachable (request, stage) run once and reused.
    CheckpointedFull,
    /// What a sparse observation set actually paid.
    Sparse,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::NaiveFull => "naive_full",
            Regime::CheckpointedFull => "checkpointed_full",
            Regime::Sparse => "sparse",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LedgerRow {
    pub regime: Regime,
    pub invocations: u64,
    pub dollars: f64,
}

/// Invocations and dollars of one profiling regime on `world`.
///
/// A stage reached by request `q` (all earlier stages on its prefix failed)
/// is invoked once per terminal path through it under the naive regime and
/// once in total when checkpointed. `Sparse` reads the observation set.
pub fn checkpoint_cost_accounting(world: &GroundTruthWorld, regime: Regime, obs: Option<&ObservationSet>) -> LedgerRow {
    if regime == Regime::Sparse {
        let obs = obs.expect("sparse regime needs observations");
        return LedgerRow { regime, invocations: obs.invocations(), dollars: obs.spent };
    }
    let s = world.structure();
    let weight: Vec<u64> = s
        .ids()
        .map(|id| match regime {
            Regime::NaiveFull => (id.0..s.subtree_end(id).0).filter(|&v| s.node(NodeId(v)).terminal_eligible).count() as u64,
            _ => 1,
        })
        .collect();
    let mut invocations = 0u64;
    let mut dollars = 0.0;
    for q in world.request_ids() {
        let mut done = vec![false; s.len()];
        for id in s.ids().skip(1) {
            let parent = s.node(id).parent.expect("non-root");
            if done[parent.index()] {
                done[id.index()] = true;
                continue;
            }
            let w = weight[id.index()];
            invocations += w;
            dollars += w as f64 * world.stage_cost(q, id);
            done[id.index()] = world.node_outcome(q, id);
        }
    }
    LedgerRow { regime, invocations, dollars }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostLedger {
    pub rows: Vec<LedgerRow>,
}

impl CostLedger {
    pub fn compute(world: &GroundTruthWorld, obs: Option<&ObservationSet>) -> Self {
        let mut rows = vec![
            checkpoint_cost_accounting(world, Regime::NaiveFull, None),
            checkpoint_cost_accounting(world, Regime::CheckpointedFull, None),
        ];
        if let Some(obs) = obs {
            rows.push(checkpoint_cost_accounting(world, Regime::Sparse, Some(obs)));
        }
        CostLedger { rows }
    }

    pub fn row(&self, regime: Regime) -> Option<&LedgerRow> {
        self.rows.iter().find(|r| r.regime == regime)
    }

    /// Naive dollars over this regime's dollars.
    pub fn ratio(&self, regime: Regime) -> Option<f64> {
        let naive = self.row(Regime::NaiveFull)?.dollars;
        self.row(regime).map(|r| naive / r.dollars)
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["regime", "invocations", "dollars", "ratio"])?;
        for r in &self.rows {
            let ratio = self.ratio(r.regime).unwrap_or(f64::NAN);
            w.write_record([r.regime.name().to_string(), r.invocations.to_string(), r.dollars.to_string(), ratio.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}
