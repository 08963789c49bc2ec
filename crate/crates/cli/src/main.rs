//! `pvsql`: constraint extraction, verification, single-task runs and
//! benchmark evaluation from the command line.
//!
//! Exit codes: 0 success, 1 task-level failure (including a verification
//! that finds violations), 2 usage or configuration error.

mod commands;
mod config;

use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pvsql::bench::DatasetFormat;

use config::PipelineArgs;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Failure(_) => 1,
            CliError::Usage(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "pvsql", version, about = "Probe-and-verify text-to-SQL")]
pub struct Cli {
    /// Machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// error | warn | info | debug | trace (prompts are logged at debug)
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: tracing::Level,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct TaskArgs {
    /// Task JSON file (task_id, db_id, question, evidence, gold_sql).
    #[arg(long, conflicts_with_all = ["question", "db_id"])]
    pub task: Option<PathBuf>,
    #[arg(long, requires = "db_id")]
    pub question: Option<String>,
    #[arg(long, default_value = "")]
    pub evidence: String,
    #[arg(long)]
    pub db_id: Option<String>,
}

#[derive(Debug, Clone, clap::Args)]
pub struct TasksFile {
    /// Benchmark task file (JSON array or JSON lines).
    #[arg(long)]
    pub tasks: PathBuf,
    #[arg(long, default_value = "bird")]
    pub format: DatasetFormat,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract constraints from a question.
    Extract {
        #[arg(long)]
        question: String,
        #[arg(long, default_value = "")]
        evidence: String,
    },
    /// Check SQL against the constraints of a question (no database).
    Verify {
        #[arg(long)]
        sql: String,
        #[arg(long)]
        question: String,
        #[arg(long, default_value = "")]
        evidence: String,
    },
    /// Run the probe loop alone and print the grounding context.
    Probe {
        #[command(flatten)]
        task: TaskArgs,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Run the full pipeline on one task and print its trace.
    Run {
        #[command(flatten)]
        task: TaskArgs,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Run and score a benchmark task file.
    Bench {
        #[command(flatten)]
        tasks: TasksFile,
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Worker threads (0 = one per CPU).
        #[arg(long)]
        workers: Option<usize>,
        /// Where to write the JSON report.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where to write one run trace per line.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Gold-SQL pass rate of the extractor, plus repair rates when a trace
    /// is given. Never calls a model.
    EvalConstraints {
        #[command(flatten)]
        tasks: TasksFile,
        #[arg(long)]
        db_root: Option<PathBuf>,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Rerun repair on failed tasks with constraints derived from gold SQL.
    Headroom {
        #[command(flatten)]
        tasks: TasksFile,
        #[arg(long)]
        trace: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Model-judged analyses over a trace: error classes or probe quality.
    Judge {
        #[command(flatten)]
        tasks: TasksFile,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, value_enum, default_value = "errors")]
        what: commands::JudgeKind,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Write the bundled retail database, a demo task and its scripted
    /// replies into a directory.
    InitFixture {
        #[arg(long)]
        dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .with_max_level(cli.log_level)
        .init();
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
