use std::io::{BufReader, Write};
use std::path::Path;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use serde::{Deserialize, Serialize};
use trieflow_core::estimators::{annotate_estimate, error_report, estimate, ErrorReport};
use trieflow_core::planner::select_path;
use trieflow_core::profiler::{cascade_sample, coverage_stats, Budget, CostLedger, ObservationSet};
use trieflow_core::sim::{
    frontier_sweep, policy_gap_report, run_scenario, sweep_sources, write_frontier_csv, write_gap_csv, AnnotationSource,
    Scenario,
};
use trieflow_core::trie::{load_annotations, AnnotationFile};
use trieflow_core::workload::{presets, WorldDocument};
use trieflow_core::{true_column_means, ExecutionTrie, GroundTruthWorld, ModelCatalog, WorkflowTemplate};

use crate::manifest::OutDir;
use crate::{report, Command};

/// Exit code of `plan` when no node meets the objective.
const INFEASIBLE: u8 = 3;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::GenWorld { config, preset, seed, out } => gen_world(config.as_deref(), preset.as_deref(), seed, &out),
        Command::Profile { config, coverage, seed, out } => profile(&config, coverage, seed, &out),
        Command::Estimate { config, observations, method, out } => {
            estimate_cmd(&config, &observations, method, &out)
        }
        Command::Plan { config, annotations, objective, force, out } => plan(&config, &annotations, objective, force, &out),
        Command::Simulate { config, seed, force, out } => simulate(&config, seed, force, &out),
        Command::Report { kind, out, inputs } => report_cmd(kind, &inputs, &out),
    }
}

fn load_world(path: &Path) -> Result<(WorldDocument, GroundTruthWorld)> {
    let doc = WorldDocument::load(path).with_context(|| format!("loading world {}", path.display()))?;
    let world = doc.generate()?;
    Ok((doc, world))
}

fn oracle_trie(world: &GroundTruthWorld) -> Result<ExecutionTrie> {
    let mut trie = world.structure().clone();
    true_column_means(world, &trie)?.annotate(&mut trie);
    Ok(trie)
}

/// Terminal nodes not dominated in (accuracy up, cost down, latency down).
fn pareto(trie: &ExecutionTrie) -> Vec<bool> {
    let terminals: Vec<_> = trie.terminal_nodes().filter_map(|id| trie.metrics(id).map(|m| (id, m))).collect();
    let mut flags = vec![false; trie.len()];
    for &(id, (a, c, l)) in &terminals {
        flags[id.index()] = !terminals.iter().any(|&(_, (a2, c2, l2))| {
            a2 >= a && c2 <= c && l2 <= l && (a2 > a || c2 < c || l2 < l)
        });
    }
    flags
}

#[derive(Serialize)]
struct WorldSummary {
    num_requests: usize,
    models: usize,
    max_depth: usize,
    nodes: usize,
    terminal_paths: usize,
    pareto_paths: usize,
}

fn gen_world(config: Option<&Path>, preset: Option<&str>, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut dir = OutDir::create(out, "gen-world")?;
    let mut doc = match (config, preset) {
        (Some(p), _) => {
            dir.input("config", p);
            WorldDocument::load(p).with_context(|| format!("loading world {}", p.display()))?
        }
        (None, Some(name)) => presets::by_name(name, seed.unwrap_or(0)).ok_or_else(|| {
            anyhow!("unknown preset `{name}`; expected one of {}", presets::WORLD_PRESETS.join(", "))
        })?,
        (None, None) => unreachable!("clap requires one of --config and --preset"),
    };
    if let Some(s) = seed {
        doc.seed = s;
    }
    doc.validate()?;
    let world = doc.generate()?;
    let truth = oracle_trie(&world)?;
    let front = pareto(&truth);
    dir.seed(doc.seed);
    dir.config(&doc)?;
    dir.write("world.json", |w| Ok(w.write_all((doc.to_json() + "\n").as_bytes())?))?;
    dir.write("annotations.json", |w| Ok(w.write_all(AnnotationFile::from_trie(&truth).to_json().as_bytes())?))?;
    dir.write("truth.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["path", "depth", "terminal", "acc", "cost", "lat", "pareto"])?;
        for id in truth.ids().skip(1) {
            let n = truth.node(id);
            let (a, co, l) = truth.metrics(id).expect("oracle annotates every node");
            c.write_record([
                truth.prefix_key(id),
                n.depth.to_string(),
                n.terminal_eligible.to_string(),
                a.to_string(),
                co.to_string(),
                l.to_string(),
                front[id.index()].to_string(),
            ])?;
        }
        c.flush()?;
        Ok(())
    })?;
    let summary = WorldSummary {
        num_requests: world.num_requests(),
        models: truth.models().len(),
        max_depth: truth.max_depth(),
        nodes: truth.len() - 1,
        terminal_paths: truth.terminal_nodes().count(),
        pareto_paths: front.iter().filter(|&&f| f).count(),
    };
    dir.write("summary.json", |w| Ok(w.write_all((serde_json::to_string_pretty(&summary)? + "\n").as_bytes())?))?;
    dir.finish()
}

fn profile(config: &Path, coverage: f64, seed: u64, out: &Path) -> Result<()> {
    let mut dir = OutDir::create(out, "profile")?;
    let (doc, world) = load_world(config)?;
    dir.input("config", config);
    dir.seed(seed);
    dir.config(serde_json::json!({ "coverage": coverage, "world_seed": doc.seed }))?;
    let obs = cascade_sample(&world, Budget::Coverage(coverage), seed)?;
    let s = world.structure();
    dir.write("observations.jsonl", |w| Ok(obs.write_jsonl(s, w)?))?;
    dir.write("ledger.csv", |w| Ok(CostLedger::compute(&world, Some(&obs)).write_csv(w)?))?;
    let cov = coverage_stats(&obs, s);
    dir.write("coverage.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["depth", "columns", "observed_columns", "column_fraction", "entries", "cell_density"])?;
        for d in &cov.depths {
            c.write_record([
                d.depth.to_string(),
                d.columns.to_string(),
                d.observed_columns.to_string(),
                d.column_fraction().to_string(),
                d.entries.to_string(),
                d.cell_density(world.num_requests()).to_string(),
            ])?;
        }
        c.flush()?;
        Ok(())
    })?;
    dir.finish()
}

fn estimate_cmd(config: &Path, observations: &Path, method: trieflow_core::estimators::Method, out: &Path) -> Result<()> {
    let mut dir = OutDir::create(out, "estimate")?;
    let (_, world) = load_world(config)?;
    dir.input("config", config);
    dir.input("observations", observations);
    dir.config(serde_json::json!({ "method": method }))?;
    let s = world.structure();
    let file = std::fs::File::open(observations).with_context(|| format!("opening {}", observations.display()))?;
    let obs = ObservationSet::read_jsonl(s, BufReader::new(file))?;
    dir.seed(obs.seed);
    let est = estimate(method, &obs, s);
    let annotated = annotate_estimate(s, &est, &obs);
    let mut file = AnnotationFile::from_trie(&annotated);
    file.meta = est.meta();
    dir.write("annotations.json", |w| Ok(w.write_all(file.to_json().as_bytes())?))?;
    let truth = true_column_means(&world, s)?;
    let rep = error_report(&est, &truth.mu, s);
    dir.write("error_report.csv", |w| Ok(ErrorReport::write_csv(&[rep], w)?))?;
    dir.finish()
}

/// The parts of a world document the trie is built from.
#[derive(Serialize, Deserialize)]
struct Shape {
    catalog: ModelCatalog,
    template: WorkflowTemplate,
}

fn plan(
    config: &Path,
    annotations: &Path,
    objective: trieflow_core::planner::Objective,
    force: bool,
    out: &Path,
) -> Result<()> {
    let mut dir = OutDir::create(out, "plan")?;
    let text = std::fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let shape: Shape = serde_json::from_str(&text).with_context(|| format!("parsing {}", config.display()))?;
    dir.input("config", config);
    dir.input("annotations", annotations);
    dir.config(serde_json::json!({ "objective": objective.to_string(), "force": force }))?;
    let trie = load_annotations(annotations, &shape.template, &shape.catalog, force)
        .with_context(|| format!("loading {}", annotations.display()))?;
    let result = select_path(&trie.view(), &objective);
    dir.write("plan.csv", |w| Ok(result.write_csv(&trie, &objective, w)?))?;
    dir.finish()?;
    match result.binding {
        Some(b) => Err(Infeasible(b.name()).into()),
        None => Ok(()),
    }
}

/// No node meets the objective; carries the binding constraint.
#[derive(Debug)]
pub struct Infeasible(pub &'static str);

impl std::fmt::Display for Infeasible {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "INFEASIBLE: no path meets the objective (binding: {})", self.0)
    }
}

impl std::error::Error for Infeasible {}

pub fn exit_code(e: &anyhow::Error) -> ExitCode {
    if e.downcast_ref::<Infeasible>().is_some() {
        ExitCode::from(INFEASIBLE)
    } else {
        ExitCode::FAILURE
    }
}

fn simulate(config: &Path, seed: Option<u64>, force: bool, out: &Path) -> Result<()> {
    let mut dir = OutDir::create(out, "simulate")?;
    let mut scenario = Scenario::load(config).with_context(|| format!("loading scenario {}", config.display()))?;
    if let Some(offset) = seed {
        scenario = scenario.reseeded(offset);
    }
    if force {
        if let AnnotationSource::File { force, .. } = &mut scenario.annotations {
            *force = true;
        }
    }
    dir.input("config", config);
    dir.seed(scenario.seed);
    dir.config(&scenario)?;
    let base = config.parent().unwrap_or(Path::new(""));
    let p = scenario.prepare(base)?;
    let tag = (scenario.name.as_str(), p.hash.as_str());
    if !scenario.policies.is_empty() {
        let report = run_scenario(&p)?;
        dir.write("requests.csv", |w| Ok(report.write_rows_csv(w)?))?;
        dir.write("summary.csv", |w| Ok(report.write_summary_csv(w)?))?;
    }
    if let Some(cfg) = &scenario.frontier {
        let rows = frontier_sweep(&p.truth, &sweep_sources(&p, cfg)?, cfg.kind, &cfg.grid);
        dir.write("frontier.csv", |w| Ok(write_frontier_csv(&rows, cfg.kind, tag, w)?))?;
    }
    if let Some(cfg) = &scenario.policy_gap {
        let rows = policy_gap_report(&p.truth, &sweep_sources(&p, cfg)?, &cfg.grid);
        dir.write("gap.csv", |w| Ok(write_gap_csv(&rows, tag, w)?))?;
    }
    dir.finish()
}

fn report_cmd(kind: crate::ReportKind, inputs: &[std::path::PathBuf], out: &Path) -> Result<()> {
    let mut dir = OutDir::create(out, "report")?;
    for (i, p) in inputs.iter().enumerate() {
        dir.input(&format!("input{i}"), p);
    }
    let name = match kind {
        crate::ReportKind::Violation => "violation_vs_slo.csv",
        crate::ReportKind::Frontier => "frontier.csv",
        crate::ReportKind::Gap => "gap.csv",
    };
    dir.config(serde_json::json!({ "kind": name.trim_end_matches(".csv") }))?;
    let merged = report::merge(kind, inputs)?;
    for s in &merged.mismatched {
        eprintln!("warning: scenario `{s}` appears with different hashes across inputs");
    }
    dir.write(name, |w| report::write_csv(&merged, w))?;
    dir.finish()
}
