//! Execution accuracy, efficiency score and aggregate reports.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::executor::{DatabaseHandle, ExecError};
use crate::sqlcheck::parse_sql;
use crate::types::{CellValue, Difficulty, ExecResult, Mode};

/// Label used wherever the efficiency score is reported.
pub const VES_LABEL: &str = "VES (sqrt time-ratio)";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    /// The gold query itself failed; the task is excluded from metrics.
    #[error("gold SQL failed: {0}")]
    GoldExecution(String),
}

// Cells compared by value: numbers in micro-units so that 1 and 1.0 match and
// floats agree to 1e-6; text exactly.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum NormCell {
    Null,
    Num(i128),
    Text(String),
    Blob(String),
}

fn norm(c: &CellValue) -> NormCell {
    match c {
        CellValue::Null => NormCell::Null,
        CellValue::Int(i) => NormCell::Num(*i as i128 * 1_000_000),
        CellValue::Real(x) => NormCell::Num((x * 1e6).round() as i128),
        CellValue::Text(s) => NormCell::Text(s.clone()),
        CellValue::Blob { blob_hex } => NormCell::Blob(blob_hex.clone()),
    }
}

fn norm_rows(r: &ExecResult) -> Vec<Vec<NormCell>> {
    r.rows.iter().map(|row| row.iter().map(norm).collect()).collect()
}

/// Whether the gold query fixes row order at its outermost level.
pub fn gold_is_ordered(gold_sql: &str) -> bool {
    parse_sql(gold_sql).map(|ast| !ast.top_query().order_by.is_empty()).unwrap_or(false)
}

/// Compares two results: same column count, and equal rows as multisets, or
/// as sequences when `ordered`. Column names are ignored.
pub fn results_match(gold: &ExecResult, pred: &ExecResult, ordered: bool) -> bool {
    if gold.columns.len() != pred.columns.len() || gold.rows.len() != pred.rows.len() {
        return false;
    }
    let (mut g, mut p) = (norm_rows(gold), norm_rows(pred));
    if !ordered {
        g.sort();
        p.sort();
    }
    g == p
}

/// Executes both queries and compares their results. A failing prediction
/// is simply wrong; a failing gold query is an error.
pub fn execution_accuracy(pred_sql: &str, gold_sql: &str, db: &DatabaseHandle) -> Result<bool, EvalError> {
    let gold = db.execute(gold_sql, None).map_err(|e| EvalError::GoldExecution(e.to_string()))?;
    Ok(match db.execute(pred_sql, None) {
        Ok(pred) => results_match(&gold, &pred, gold_is_ordered(gold_sql)),
        Err(_) => false,
    })
}

/// Median of three timed runs of each query after one warm-up each. Gold
/// and prediction runs alternate so both see the same cache state.
pub fn time_pair(db: &DatabaseHandle, gold_sql: &str, pred_sql: &str) -> Result<(f64, f64), ExecError> {
    db.execute(gold_sql, None)?;
    db.execute(pred_sql, None)?;
    let timed = |sql: &str| -> Result<f64, ExecError> {
        let start = Instant::now();
        db.execute(sql, None)?;
        Ok(start.elapsed().as_secs_f64())
    };
    let (mut g, mut p) = ([0.0; 3], [0.0; 3]);
    for i in 0..3 {
        g[i] = timed(gold_sql)?;
        p[i] = timed(pred_sql)?;
    }
    g.sort_by(f64::total_cmp);
    p.sort_by(f64::total_cmp);
    Ok((g[1], p[1]))
}

/// One lock per database file so timing runs on the same file never overlap.
#[derive(Debug, Default)]
pub struct TimingLocks {
    locks: Mutex<HashMap<PathBuf, Arc<Mutex<()>>>>,
}

impl TimingLocks {
    pub fn for_path(&self, path: &std::path::Path) -> Arc<Mutex<()>> {
        self.locks.lock().unwrap().entry(path.to_path_buf()).or_default().clone()
    }
}

/// Outcome of scoring one task against its gold query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Scored {
    Scored {
        correct: bool,
        /// Timings are only taken for correct predictions.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t_gold: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t_pred: Option<f64>,
    },
    Excluded { reason: String },
}

/// EX plus, for correct predictions, serialized timings for VES.
pub fn score_prediction(pred_sql: &str, gold_sql: &str, db: &DatabaseHandle, locks: Option<&TimingLocks>) -> Scored {
    let correct = match execution_accuracy(pred_sql, gold_sql, db) {
        Ok(c) => c,
        Err(e) => {
            warn!(db = db.db_id(), error = %e, "gold execution failed, task excluded");
            return Scored::Excluded { reason: e.to_string() };
        }
    };
    if !correct {
        return Scored::Scored { correct, t_gold: None, t_pred: None };
    }
    let lock = locks.map(|l| l.for_path(db.path()));
    let _guard = lock.as_ref().map(|l| l.lock().unwrap_or_else(|p| p.into_inner()));
    match time_pair(db, gold_sql, pred_sql) {
        Ok((g, p)) => Scored::Scored { correct, t_gold: Some(g), t_pred: Some(p) },
        // Both ran once already; a failure here is a timeout under load.
        Err(_) => Scored::Scored { correct, t_gold: None, t_pred: None },
    }
}

/// `100 · mean(correct · sqrt(t_gold / t_pred))`. Correct records with a
/// non-positive or missing timing count with ratio 1.
pub fn valid_efficiency_score(records: &[(bool, f64, f64)]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    let sum: f64 = records
        .iter()
        .filter(|(correct, _, _)| *correct)
        .map(|&(_, g, p)| if g > 0.0 && p > 0.0 { (g / p).sqrt() } else { 1.0 })
        .sum();
    100.0 * sum / records.len() as f64
}

/// `tokens_in / 8 + tokens_out`.
pub fn weighted_token_cost(tokens_in: f64, tokens_out: f64) -> f64 {
    tokens_in / 8.0 + tokens_out
}

/// Per-task inputs to a [`MetricReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskEvaluation {
    pub task_id: String,
    pub difficulty: Difficulty,
    pub score: Scored,
    pub tokens_in: u64,
    pub tokens_out: u64,
    pub wall_seconds: f64,
    pub probe_count: usize,
    pub repair_count: usize,
    pub llm_calls: usize,
    pub failed: bool,
}

impl TaskEvaluation {
    fn ves_sample(&self) -> Option<(bool, f64, f64)> {
        match &self.score {
            Scored::Scored { correct, t_gold, t_pred } => {
                Some((*correct, t_gold.unwrap_or(0.0), t_pred.unwrap_or(0.0)))
            }
            Scored::Excluded { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifficultyStats {
    pub ex: f64,
    pub ves: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Scored tasks; excluded tasks are counted separately.
    pub n_tasks: usize,
    pub n_excluded: usize,
    pub ex: f64,
    pub ves: f64,
    pub per_difficulty: BTreeMap<Difficulty, DifficultyStats>,
    pub mean_tokens_in: f64,
    pub mean_tokens_out: f64,
    pub weighted_token_cost: f64,
    pub mean_wall_seconds: f64,
    pub mean_probes: f64,
    pub mean_repairs: f64,
    pub mean_llm_calls: f64,
    /// Tasks whose pipeline run ended in an error.
    pub n_pipeline_failures: usize,
}

fn mean(xs: impl Iterator<Item = f64>, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        xs.sum::<f64>() / n as f64
    }
}

fn ex_ves(samples: &[(bool, f64, f64)]) -> (f64, f64) {
    let ex = mean(samples.iter().map(|s| if s.0 { 100.0 } else { 0.0 }), samples.len());
    (ex, valid_efficiency_score(samples))
}

impl MetricReport {
    /// Aggregates scored tasks; excluded ones only bump `n_excluded`.
    pub fn compute(evals: &[TaskEvaluation]) -> Self {
        let scored: Vec<(&TaskEvaluation, (bool, f64, f64))> =
            evals.iter().filter_map(|e| e.ves_sample().map(|s| (e, s))).collect();
        let n = scored.len();
        let samples: Vec<_> = scored.iter().map(|(_, s)| *s).collect();
        let (ex, ves) = ex_ves(&samples);

        let mut groups: BTreeMap<Difficulty, Vec<(bool, f64, f64)>> = BTreeMap::new();
        for (e, s) in &scored {
            groups.entry(e.difficulty).or_default().push(*s);
        }
        let per_difficulty = groups
            .into_iter()
            .map(|(d, s)| {
                let (ex, ves) = ex_ves(&s);
                (d, DifficultyStats { ex, ves, n: s.len() })
            })
            .collect();

        let avg = |f: fn(&TaskEvaluation) -> f64| mean(scored.iter().map(|(e, _)| f(e)), n);
        let mean_tokens_in = avg(|e| e.tokens_in as f64);
        let mean_tokens_out = avg(|e| e.tokens_out as f64);
        MetricReport {
            n_tasks: n,
            n_excluded: evals.len() - n,
            ex,
            ves,
            per_difficulty,
            mean_tokens_in,
            mean_tokens_out,
            weighted_token_cost: weighted_token_cost(mean_tokens_in, mean_tokens_out),
            mean_wall_seconds: avg(|e| e.wall_seconds),
            mean_probes: avg(|e| e.probe_count as f64),
            mean_repairs: avg(|e| e.repair_count as f64),
            mean_llm_calls: avg(|e| e.llm_calls as f64),
            n_pipeline_failures: scored.iter().filter(|(e, _)| e.failed).count(),
        }
    }

    /// Aligned text table: one overall row, then one row per difficulty.
    pub fn to_table(&self, mode: Mode) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<12} {:>6} {:>7} {:>22} {:>9} {:>8} {:>9} {:>8}",
            "Split", "N", "EX", VES_LABEL, "In", "Out", "Cost", "Time(s)"
        );
        let _ = writeln!(
            out,
            "{:<12} {:>6} {:>7.2} {:>22.2} {:>9.0} {:>8.0} {:>9.1} {:>8.2}",
            format!("{mode:?}").to_lowercase(),
            self.n_tasks,
            self.ex,
            self.ves,
            self.mean_tokens_in,
            self.mean_tokens_out,
            self.weighted_token_cost,
            self.mean_wall_seconds
        );
        for (d, s) in &self.per_difficulty {
            let _ = writeln!(out, "{:<12} {:>6} {:>7.2} {:>22.2}", format!("  {}", d.as_str()), s.n, s.ex, s.ves);
        }
        if self.n_excluded > 0 {
            let _ = writeln!(out, "excluded (gold failed or missing): {}", self.n_excluded);
        }
        out
    }
}
