//! Parallel benchmark runs.

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use crate::agent::{run_task, AgentConfig};
use crate::executor::{DatabaseHandle, ExecConfig};
use crate::llm::{BackendConfig, ChatBackend};
use crate::types::{Mode, RunRecord, Task};

use super::metrics::{score_prediction, MetricReport, Scored, TaskEvaluation, TimingLocks, VES_LABEL};

/// Everything a run needs, as read from a config file. Agent and executor
/// keys sit at the top level; the backend has its own table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct PipelineConfig {
    #[serde(flatten)]
    pub agent: AgentConfig,
    #[serde(flatten)]
    pub exec: ExecConfig,
    pub backend: BackendConfig,
    pub db_root: Option<PathBuf>,
    /// Worker threads; 0 means one per CPU.
    pub workers: usize,
}

impl PipelineConfig {
    /// Top-level keys accepted in a config file.
    pub const KEYS: [&'static str; 10] = [
        "max_probes",
        "max_repairs",
        "mode",
        "temperature",
        "max_output_tokens",
        "timeout_seconds",
        "probe_row_cap",
        "backend",
        "db_root",
        "workers",
    ];
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("no database root configured")]
    NoDbRoot,
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub mode: Mode,
    pub timeout_seconds: f64,
    pub ves_definition: String,
    pub metrics: MetricReport,
    pub tasks: Vec<TaskEvaluation>,
}

impl BenchReport {
    pub fn from_evaluations(config: &PipelineConfig, tasks: Vec<TaskEvaluation>) -> Self {
        Self {
            mode: config.agent.mode,
            timeout_seconds: config.exec.timeout_seconds,
            ves_definition: VES_LABEL.to_string(),
            metrics: MetricReport::compute(&tasks),
            tasks,
        }
    }

    pub fn to_table(&self) -> String {
        format!("timeout: {}s\n{}", self.timeout_seconds, self.metrics.to_table(self.mode))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutput {
    pub report: BenchReport,
    /// In task order, with `ex_correct` filled in where scoring was possible.
    pub records: Vec<RunRecord>,
}

fn evaluation(task: &Task, record: &RunRecord, score: Scored) -> TaskEvaluation {
    TaskEvaluation {
        task_id: task.task_id.clone(),
        difficulty: task.difficulty,
        score,
        tokens_in: record.tokens_in,
        tokens_out: record.tokens_out,
        wall_seconds: record.wall_seconds,
        probe_count: record.probe_count,
        repair_count: record.repair_count,
        llm_calls: record.llm_calls,
        failed: record.failed,
    }
}

fn run_one(
    task: &Task,
    config: &PipelineConfig,
    db_root: &std::path::Path,
    backend: &dyn ChatBackend,
    locks: &TimingLocks,
) -> (RunRecord, TaskEvaluation) {
    let db = match DatabaseHandle::open_in(db_root, &task.db_id, config.exec) {
        Ok(db) => db,
        Err(e) => {
            warn!(task = %task.task_id, error = %e, "database unavailable, task excluded");
            let mut record = RunRecord::empty(&task.task_id, config.agent.mode);
            record.failed = true;
            record.error = Some(e.to_string());
            let eval = evaluation(task, &record, Scored::Excluded { reason: e.to_string() });
            return (record, eval);
        }
    };
    let mut record = run_task(task, &db, backend, &config.agent);
    let score = match task.gold_sql.as_deref() {
        Some(gold) => score_prediction(&record.final_sql, gold, &db, Some(locks)),
        None => Scored::Excluded { reason: "no gold SQL".into() },
    };
    if let Scored::Scored { correct, .. } = score {
        record.ex_correct = Some(correct);
    }
    let eval = evaluation(task, &record, score);
    (record, eval)
}

/// Runs every task on a bounded pool and scores it. Aggregation happens
/// once all tasks are done, in task order.
pub fn run_benchmark(tasks: &[Task], config: &PipelineConfig, backend: &dyn ChatBackend) -> Result<BenchOutput, BenchError> {
    let db_root = config.db_root.as_deref().ok_or(BenchError::NoDbRoot)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| BenchError::Pool(e.to_string()))?;
    let locks = TimingLocks::default();
    let start = Instant::now();
    info!(tasks = tasks.len(), workers = pool.current_num_threads(), mode = ?config.agent.mode, "benchmark started");
    let results: Vec<(RunRecord, TaskEvaluation)> =
        pool.install(|| tasks.par_iter().map(|t| run_one(t, config, db_root, backend, &locks)).collect());
    let (records, evals): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let report = BenchReport::from_evaluations(config, evals);
    info!(
        ex = report.metrics.ex,
        ves = report.metrics.ves,
        seconds = start.elapsed().as_secs_f64(),
        "benchmark finished"
    );
    Ok(BenchOutput { report, records })
}
