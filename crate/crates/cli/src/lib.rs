//! Command-line harness around the `apgcert` solvers.
//!
//! `solve` runs one JSON spec and writes a per-iteration trace CSV plus a
//! summary document; `sweep` reruns a spec at decreasing tolerances and
//! tabulates oracle counts. Exit codes: 0 certified, 1 invalid input,
//! 2 timeout or solver failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub mod output;
pub mod run;
pub mod spec;
pub mod sweep;

pub use run::{execute, Outcome, Summary, Termination, Trace};
pub use spec::{Overrides, ProblemSpec, RunSpec, Solver};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid spec: {0}")]
    Spec(String),
    #[error("{}: {1}", .0.display())]
    Io(PathBuf, std::io::Error),
    #[error("{}: {1}", .0.display())]
    Csv(PathBuf, csv::Error),
    #[error(transparent)]
    Solver(#[from] apgcert::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solver(
                apgcert::Error::ApgTimeout(_)
                | apgcert::Error::OuterTimeout(_)
                | apgcert::Error::LineSearchFailed { .. }
                | apgcert::Error::NonFinite { .. }
                | apgcert::Error::Invariant(_),
            ) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "apgcert",
    version,
    about = "Certified accelerated proximal gradient solvers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one spec file.
    Solve {
        #[arg(long)]
        spec: PathBuf,
        /// Trace CSV; overrides `output.trace` in the spec.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Summary JSON; overrides `output.summary`. Printed to stdout when
        /// neither is given.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Record wall time in the summary (breaks byte-identical reruns).
        #[arg(long)]
        timing: bool,
    },
    /// Run one spec at several tolerances.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        /// Comma-separated, strictly decreasing.
        #[arg(long)]
        eps: String,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Paths inside a spec are relative to the spec file.
fn resolve(spec_path: &Path, p: &Path) -> PathBuf {
    match spec_path.parent() {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.to_path_buf(),
    }
}

fn solve(
    spec_path: &Path,
    trace: Option<PathBuf>,
    summary: Option<PathBuf>,
    timing: bool,
) -> Result<i32, CliError> {
    let spec = RunSpec::load(spec_path)?;
    let trace = trace.or_else(|| spec.output.trace.as_deref().map(|p| resolve(spec_path, p)));
    let summary = summary.or_else(|| spec.output.summary.as_deref().map(|p| resolve(spec_path, p)));
    let outcome = execute(&spec, timing)?;
    if let Some(path) = &trace {
        output::write_trace(path, &outcome.trace)?;
    }
    match &summary {
        Some(path) => output::write_summary(path, &outcome.summary)?,
        None => print!("{}", output::summary_json(&outcome.summary)),
    }
    let code = outcome.exit_code();
    if code != 0 {
        let s = &outcome.summary;
        let why = s.message.clone().unwrap_or_else(|| "not certified".into());
        eprintln!("apgcert: {}: {why}", spec.solver.name());
    }
    Ok(code)
}

fn sweep_cmd(spec_path: &Path, eps: &str, out: &Path) -> Result<i32, CliError> {
    let eps = sweep::parse_eps(eps)?;
    let spec = RunSpec::load(spec_path)?;
    let results = sweep::run_all(&spec, &eps, sweep::thread_cap());
    let mut outcomes = Vec::with_capacity(results.len());
    for r in results {
        outcomes.push(r?);
    }
    let rows = sweep::table(&eps, &outcomes);
    sweep::write_table(out, &rows)?;
    let failed: Vec<String> = rows
        .iter()
        .filter(|r| r.termination != Termination::Certified)
        .map(|r| format!("{:e}", r.epsilon))
        .collect();
    if failed.is_empty() {
        Ok(0)
    } else {
        eprintln!(
            "apgcert: sweep runs not certified at epsilon {}",
            failed.join(", ")
        );
        Ok(2)
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let res = match cli.command {
        Command::Solve {
            spec,
            trace,
            summary,
            timing,
        } => solve(&spec, trace, summary, timing),
        Command::Sweep { spec, eps, out } => sweep_cmd(&spec, &eps, &out),
    };
    res.unwrap_or_else(|e| {
        eprintln!("apgcert: {e}");
        e.exit_code()
    })
}
