mod commands;
mod manifest;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use trieflow_core::estimators::Method;
use trieflow_core::planner::Objective;

/// Annotated execution tries: generate worlds, profile, estimate, plan and simulate.
#[derive(Parser, Debug)]
#[command(name = "trieflow", version)]
struct Cli {
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a world document and write its oracle summary.
    GenWorld {
        /// World document (JSON).
        #[arg(long, required_unless_present = "preset", conflicts_with = "preset")]
        config: Option<PathBuf>,
        /// Built-in world instead of a document.
        #[arg(long)]
        preset: Option<String>,
        /// Replaces the document's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cascade-profile a world under a coverage budget.
    Profile {
        /// World document (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Fraction of checkpointed full-profiling dollars, in (0, 1].
        #[arg(long, value_parser = parse_coverage)]
        coverage: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate column means from observations and annotate the trie.
    Estimate {
        /// World document (JSON) the observations were taken from.
        #[arg(long)]
        config: PathBuf,
        /// Observation file written by `profile`.
        #[arg(long)]
        observations: PathBuf,
        #[arg(long, value_parser = parse_method)]
        method: Method,
        #[arg(long)]
        out: PathBuf,
    },
    /// Select a path on an annotated trie.
    Plan {
        /// JSON document with `catalog` and `template` (a world document works).
        #[arg(long)]
        config: PathBuf,
        /// Annotation file.
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long, value_parser = parse_objective)]
        objective: Objective,
        /// Accept annotations whose template or catalog hash differs.
        #[arg(long)]
        force: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a scenario file.
    Simulate {
        /// Scenario file (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Offset added to every seed of the scenario.
        #[arg(long)]
        seed: Option<u64>,
        /// Accept an annotation file whose hashes differ.
        #[arg(long)]
        force: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge CSV tables from several runs.
    Report {
        #[arg(long, value_enum)]
        kind: ReportKind,
        #[arg(long)]
        out: PathBuf,
        /// Input tables: `summary.csv`, `frontier.csv` or `gap.csv` by kind.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ReportKind {
    /// Violation rate per (SLO, policy) from simulate summaries.
    Violation,
    Frontier,
    Gap,
}

fn parse_coverage(s: &str) -> Result<f64, String> {
    let c: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if c > 0.0 && c <= 1.0 {
        Ok(c)
    } else {
        Err(format!("{c} is outside (0, 1]"))
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: trieflow_core::Error| e.to_string())
}

fn parse_objective(s: &str) -> Result<Objective, String> {
    s.parse().map_err(|e: trieflow_core::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            commands::exit_code(&e)
        }
    }
}
