use std::io::Write;

use super::ColumnMeanEstimate;
use crate::error::Result;
use crate::trie::ExecutionTrie;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DepthError {
    /// `None` aggregates every depth.
    pub depth: Option<usize>,
    pub columns: usize,
    pub mean_signed: f64,
    pub mean_abs: f64,
    pub max_abs: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    pub method: String,
    pub overall: DepthError,
    pub per_depth: Vec<DepthError>,
}

fn summarize(depth: Option<usize>, errors: &[f64]) -> DepthError {
    if errors.is_empty() {
        return DepthError { depth, ..Default::default() };
    }
    let n = errors.len() as f64;
    DepthError {
        depth,
        columns: errors.len(),
        mean_signed: errors.iter().sum::<f64>() / n,
        mean_abs: errors.iter().map(|e| e.abs()).sum::<f64>() / n,
        max_abs: errors.iter().fold(0.0, |m, e| m.max(e.abs())),
    }
}

/// Signed error `estimate - truth` over terminal-eligible columns, overall
/// and per depth. `truth` is indexed by node id.
pub fn error_report(estimate: &ColumnMeanEstimate, truth: &[f64], trie: &ExecutionTrie) -> ErrorReport {
    let mut by_depth: Vec<Vec<f64>> = vec![Vec::new(); trie.max_depth() + 1];
    for id in trie.terminal_nodes() {
        by_depth[trie.node(id).depth].push(estimate.get(id) - truth[id.index()]);
    }
    let all: Vec<f64> = by_depth.iter().flatten().copied().collect();
    ErrorReport {
        method: estimate.method.tag().to_string(),
        overall: summarize(None, &all),
        per_depth: (1..=trie.max_depth()).map(|d| summarize(Some(d), &by_depth[d])).collect(),
    }
}

impl ErrorReport {
    pub fn depth(&self, depth: usize) -> &DepthError {
        &self.per_depth[depth - 1]
    }

    pub const CSV_HEADER: [&'static str; 6] = ["method", "scope", "columns", "mean_signed", "mean_abs", "max_abs"];

    pub fn write_rows<W: Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        for row in std::iter::once(&self.overall).chain(&self.per_depth) {
            w.write_record([
                self.method.clone(),
                row.depth.map_or("all".to_string(), |d| format!("depth{d}")),
                row.columns.to_string(),
                row.mean_signed.to_string(),
                row.mean_abs.to_string(),
                row.max_abs.to_string(),
            ])?;
        }
        Ok(())
    }

    pub fn write_csv(reports: &[ErrorReport], out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::CSV_HEADER)?;
        for r in reports {
            r.write_rows(&mut w)?;
        }
        w.flush()?;
        Ok(())
    }
}
