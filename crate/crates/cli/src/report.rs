use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use trieflow_core::sim::{FRONTIER_HEADER, GAP_HEADER, SUMMARY_HEADER};

use crate::ReportKind;

pub struct Merged {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Scenario names seen with more than one hash.
    pub mismatched: BTreeSet<String>,
}

fn expected_header(kind: ReportKind) -> &'static [&'static str] {
    match kind {
        ReportKind::Violation => &SUMMARY_HEADER,
        ReportKind::Frontier => &FRONTIER_HEADER,
        ReportKind::Gap => &GAP_HEADER,
    }
}

fn read_table(path: &Path, expected: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header = r.headers()?.clone();
    if header.iter().ne(expected.iter().copied()) {
        bail!("{}: header does not match; expected {}", path.display(), expected.join(","));
    }
    r.records().map(|rec| rec.with_context(|| format!("reading {}", path.display()))).collect()
}

/// Concatenates the inputs and flags rows whose scenario name appears with
/// different hashes across inputs. Violation tables are reduced to one row
/// per (SLO, policy), sorted by SLO then policy; an empty SLO sorts last.
pub fn merge(kind: ReportKind, inputs: &[impl AsRef<Path>]) -> Result<Merged> {
    let expected = expected_header(kind);
    let mut rows = Vec::new();
    for p in inputs {
        rows.extend(read_table(p.as_ref(), expected)?);
    }
    // Every table leads with scenario, scenario_hash.
    let mut hashes: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for r in &rows {
        hashes.entry(r[0].to_string()).or_default().insert(r[1].to_string());
    }
    let mismatched: BTreeSet<String> = hashes.into_iter().filter(|(_, h)| h.len() > 1).map(|(s, _)| s).collect();
    if kind == ReportKind::Violation {
        return pool_violations(&rows, mismatched);
    }
    let mut header: Vec<String> = expected.iter().map(|s| s.to_string()).collect();
    header.push("hash_mismatch".into());
    let out = rows
        .iter()
        .map(|r| {
            let mut row: Vec<String> = r.iter().map(str::to_string).collect();
            row.push(mismatched.contains(&r[0]).to_string());
            row
        })
        .collect();
    Ok(Merged { header, rows: out, mismatched })
}

fn pool_violations(rows: &[csv::StringRecord], mismatched: BTreeSet<String>) -> Result<Merged> {
    let col = |r: &csv::StringRecord, name: &str| {
        r[SUMMARY_HEADER.iter().position(|h| *h == name).expect("summary column")].to_string()
    };
    let num = |r: &csv::StringRecord, name: &str| -> Result<f64> {
        let v = col(r, name);
        v.parse().with_context(|| format!("column `{name}`: `{v}` is not a number"))
    };
    // Rows sharing (SLO, policy) are pooled, weighting means by request count.
    let mut groups: BTreeMap<(String, String), Pool> = BTreeMap::new();
    for r in rows {
        let g = groups.entry((col(r, "slo"), col(r, "policy"))).or_default();
        let n = num(r, "requests")?;
        g.scenarios.insert(col(r, "scenario"));
        g.hashes.insert(col(r, "scenario_hash"));
        g.objectives.insert(col(r, "objective"));
        g.mismatch |= mismatched.contains(&r[0]);
        g.inputs += 1;
        g.requests += n;
        g.violations += num(r, "violations")?;
        g.acc += n * num(r, "accuracy")?;
        g.cost += n * num(r, "mean_cost")?;
        g.lat += n * num(r, "mean_latency")?;
    }
    let mut table: Vec<(f64, Vec<String>)> = groups
        .into_iter()
        .map(|((slo, policy), g)| {
            let join = |set: &BTreeSet<String>| set.iter().cloned().collect::<Vec<_>>().join(";");
            let n = g.requests.max(1.0);
            let key = slo.parse::<f64>().unwrap_or(f64::INFINITY);
            let row = vec![
                slo,
                policy,
                join(&g.scenarios),
                join(&g.hashes),
                join(&g.objectives),
                g.inputs.to_string(),
                g.requests.to_string(),
                g.violations.to_string(),
                (g.violations / n).to_string(),
                (g.acc / n).to_string(),
                (g.cost / n).to_string(),
                (g.lat / n).to_string(),
                g.mismatch.to_string(),
            ];
            (key, row)
        })
        .collect();
    table.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1[1].cmp(&b.1[1])));
    let header = [
        "slo", "policy", "scenario", "scenario_hash", "objective", "inputs", "requests", "violations",
        "violation_rate", "accuracy", "mean_cost", "mean_latency", "hash_mismatch",
    ];
    Ok(Merged {
        header: header.iter().map(|s| s.to_string()).collect(),
        rows: table.into_iter().map(|t| t.1).collect(),
        mismatched,
    })
}

#[derive(Default)]
struct Pool {
    scenarios: BTreeSet<String>,
    hashes: BTreeSet<String>,
    objectives: BTreeSet<String>,
    mismatch: bool,
    inputs: usize,
    requests: f64,
    violations: f64,
    acc: f64,
    cost: f64,
    lat: f64,
}

pub fn write_csv(m: &Merged, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&m.header)?;
    for r in &m.rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}
