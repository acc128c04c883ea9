//! `teamloc` command-line front end.
//!
//! Exit codes: 0 success, 1 I/O or parse error, 2 invariant violation,
//! 3 planner infeasibility.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Deserialize;
use teamloc::rigidity::{rigidity_report, Framework, Graph, RigidityTolerances};
use teamloc::sim::{self, FailureKind, RunStatus, Scenario, SimError};
use teamloc::planner::PlannerError;
use teamloc::Vec2;

#[derive(Parser)]
#[command(name = "teamloc", version, about = "Rigidity-gated UGV+MAV localization and coverage planning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write traces and metrics.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Plan without the field-of-view constraint.
        #[arg(long)]
        baseline: bool,
    },
    /// One-shot connectivity and rigidity report for a framework file.
    Rigidity {
        #[arg(long)]
        framework: PathBuf,
    },
    /// Blind-spot extraction and planning from the start poses, no flight.
    Plan {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        baseline: bool,
    },
}

#[derive(Deserialize)]
struct FrameworkFile {
    n: usize,
    edges: Vec<(usize, usize)>,
    positions: Vec<Vec2>,
}

enum Failure {
    Io(String),
    Invariant(String),
    Infeasible(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Invariant(_) => 2,
            Failure::Infeasible(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Io(m) | Failure::Invariant(m) | Failure::Infeasible(m) => m,
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Invariant { .. } => Failure::Invariant(e.to_string()),
            SimError::Planner(PlannerError::Infeasible(_)) => Failure::Infeasible(e.to_string()),
            SimError::Planner(_) => Failure::Invariant(e.to_string()),
            SimError::Io(_) | SimError::Parse { .. } | SimError::EmptyTrace => Failure::Io(e.to_string()),
        }
    }
}

fn load(path: &Path, baseline: bool) -> Result<Scenario, Failure> {
    let mut scn = Scenario::load(path)?;
    scn.planner.baseline |= baseline;
    Ok(scn)
}

fn run(scenario: &Path, seed: Option<u64>, out: &Path, baseline: bool) -> Result<(), Failure> {
    let mut scn = load(scenario, baseline)?;
    if let Some(s) = seed {
        scn.seed = s;
    }
    let trace = sim::run(&scn);
    let summary = sim::emit_metrics(&trace, out)?;
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serialises"));
    match trace.status {
        RunStatus::Completed => Ok(()),
        RunStatus::Incomplete { reason } => {
            log::warn!("run incomplete: {reason}");
            Ok(())
        }
        RunStatus::Failed { stage, kind, message } => {
            let msg = format!("{stage}: {message}");
            Err(match kind {
                FailureKind::Infeasible => Failure::Infeasible(msg),
                FailureKind::Invariant => Failure::Invariant(msg),
                FailureKind::Solver => Failure::Io(msg),
            })
        }
    }
}

fn rigidity(path: &Path) -> Result<(), Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let file: FrameworkFile = serde_json::from_str(&text)
        .map_err(|e| Failure::Io(format!("parse error at line {}, column {}: {e}", e.line(), e.column())))?;
    let graph = Graph::new(file.n, file.edges).map_err(|e| Failure::Invariant(e.to_string()))?;
    let fw = Framework::new(graph, file.positions).map_err(|e| Failure::Invariant(e.to_string()))?;
    let report = rigidity_report(&fw, &RigidityTolerances::default()).map_err(|e| Failure::Invariant(e.to_string()))?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serialises"));
    Ok(())
}

fn plan(scenario: &Path, baseline: bool) -> Result<(), Failure> {
    let scn = load(scenario, baseline)?;
    let outcome = sim::plan_only(&scn)?;
    let body = serde_json::json!({
        "neighborhoods": outcome.neighborhoods,
        "plan": outcome.plan,
    });
    println!("{}", serde_json::to_string_pretty(&body).expect("plan serialises"));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { scenario, seed, out, baseline } => run(scenario, *seed, out, *baseline),
        Command::Rigidity { framework } => rigidity(framework),
        Command::Plan { scenario, baseline } => plan(scenario, *baseline),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
