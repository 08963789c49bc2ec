//! Component-level evaluations: gold-SQL pass rate of the extractor, repair
//! success/regression bookkeeping, and the oracle-constraint headroom rerun.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::agent::{repair_loop, AgentConfig, Session, TaskContext};
use crate::executor::{DatabaseHandle, ExecConfig};
use crate::extractor::extract_constraints;
use crate::llm::ChatBackend;
use crate::sqlcheck::{check_all_with, derive_constraints_from_sql_with, parse_sql};
use crate::types::{Draft, RunRecord, SchemaDescription, Task, ViolationSource};

use super::metrics::execution_accuracy;

fn percent(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

/// Loads each database schema once; missing databases map to `None`.
#[derive(Default)]
struct SchemaCache(HashMap<String, Option<SchemaDescription>>);

impl SchemaCache {
    fn get(&mut self, db_root: Option<&Path>, db_id: &str) -> Option<&SchemaDescription> {
        self.0
            .entry(db_id.to_string())
            .or_insert_with(|| {
                let db = DatabaseHandle::open_in(db_root?, db_id, ExecConfig::default()).ok()?;
                db.schema().ok()
            })
            .as_ref()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldFailure {
    pub task_id: String,
    pub messages: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldPassReport {
    pub pass_rate: f64,
    /// Tasks with gold SQL.
    pub n: usize,
    pub n_passed: usize,
    /// Gold queries the parser rejected; they count as failures.
    pub n_parse_errors: usize,
    /// Tasks without gold SQL, not counted.
    pub n_skipped: usize,
    pub failures: Vec<GoldFailure>,
}

/// Fraction of gold queries that satisfy every constraint extracted from
/// their own question. Uses the database schema (when `db_root` has it) for
/// date-typed columns; never calls a model.
pub fn eval_extraction_on_gold(tasks: &[Task], db_root: Option<&Path>) -> GoldPassReport {
    let mut schemas = SchemaCache::default();
    let mut report =
        GoldPassReport { pass_rate: 0.0, n: 0, n_passed: 0, n_parse_errors: 0, n_skipped: 0, failures: Vec::new() };
    for task in tasks {
        let Some(gold) = task.gold_sql.as_deref() else {
            report.n_skipped += 1;
            continue;
        };
        report.n += 1;
        let constraints = extract_constraints(&task.question, &task.evidence);
        let messages: Vec<String> = match parse_sql(gold) {
            Ok(ast) => check_all_with(&ast, &constraints, schemas.get(db_root, &task.db_id))
                .into_iter()
                .map(|v| v.message)
                .collect(),
            Err(e) => {
                report.n_parse_errors += 1;
                vec![format!("gold SQL does not parse: {e}")]
            }
        };
        if messages.is_empty() {
            report.n_passed += 1;
        } else {
            report.failures.push(GoldFailure { task_id: task.task_id.clone(), messages });
        }
    }
    report.pass_rate = percent(report.n_passed, report.n);
    report
}

/// Pooled repair transition counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct RepairRates {
    pub success_rate: f64,
    pub regression_rate: f64,
    pub violations_seen: usize,
    pub violations_resolved: usize,
    pub satisfied_seen: usize,
    pub regressions: usize,
    /// Records with at least one repair round.
    pub n_records: usize,
}

// A draft whose syntax stage failed had no later stage run, so only the
// syntax finding itself is known for it.
fn fully_checked(d: &Draft) -> bool {
    !d.violations.iter().any(|v| v.source == ViolationSource::Syntax)
}

fn ids(d: &Draft) -> BTreeSet<String> {
    d.violations.iter().map(|v| v.identity()).collect()
}

/// Success: share of violations in draft i that are gone in draft i+1 (a
/// violation hidden by a new syntax error does not count as gone).
/// Regression: share of requirements satisfied in draft i that are violated
/// in draft i+1, over the record's constraints plus any constraint or LLM
/// finding seen in its drafts, for pairs where both drafts were fully
/// checked. Both are pooled over all rounds of all records.
pub fn eval_repair_rates(records: &[RunRecord]) -> RepairRates {
    let mut r = RepairRates::default();
    for rec in records.iter().filter(|rec| rec.drafts.len() > 1) {
        r.n_records += 1;
        let mut universe: BTreeSet<String> = rec.constraints.iter().map(|c| format!("constraint:{c}")).collect();
        for d in &rec.drafts {
            universe.extend(
                d.violations
                    .iter()
                    .filter(|v| matches!(v.source, ViolationSource::Constraint | ViolationSource::Llm))
                    .map(|v| v.identity()),
            );
        }
        for pair in rec.drafts.windows(2) {
            let (before, after) = (ids(&pair[0]), ids(&pair[1]));
            let after_checked = fully_checked(&pair[1]);
            for id in &before {
                r.violations_seen += 1;
                if !after.contains(id) && (after_checked || id == "syntax") {
                    r.violations_resolved += 1;
                }
            }
            if fully_checked(&pair[0]) && after_checked {
                for id in universe.difference(&before) {
                    r.satisfied_seen += 1;
                    if after.contains(id) {
                        r.regressions += 1;
                    }
                }
            }
        }
    }
    r.success_rate = percent(r.violations_resolved, r.violations_seen);
    r.regression_rate = percent(r.regressions, r.satisfied_seen);
    r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub extraction_pass_rate: f64,
    pub repair_success_rate: f64,
    pub repair_regression_rate: f64,
}

impl ComponentReport {
    pub fn new(gold: &GoldPassReport, repair: &RepairRates) -> Self {
        Self {
            extraction_pass_rate: gold.pass_rate,
            repair_success_rate: repair.success_rate,
            repair_regression_rate: repair.regression_rate,
        }
    }
}

/// Pairs each record with its task by id, keeping record order.
pub fn join_records<'a>(tasks: &'a [Task], records: &'a [RunRecord]) -> Vec<(&'a Task, &'a RunRecord)> {
    let by_id: HashMap<&str, &Task> = tasks.iter().map(|t| (t.task_id.as_str(), t)).collect();
    records.iter().filter_map(|r| by_id.get(r.task_id.as_str()).map(|t| (*t, r))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadroomCase {
    pub task_id: String,
    pub oracle_constraints: Vec<String>,
    pub final_sql: String,
    pub repair_count: usize,
    pub corrected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadroomReport {
    /// Share of rerun failures that became EX-correct.
    pub rate: f64,
    pub n: usize,
    pub corrected: usize,
    pub cases: Vec<HeadroomCase>,
    pub skipped: Vec<(String, String)>,
}

/// Reruns the repair loop on EX-failed records with constraints derived
/// from the gold SQL, starting from the record's initial draft with the
/// configured repair budget.
pub fn headroom_rerun(
    pairs: &[(&Task, &RunRecord)],
    db_root: &Path,
    backend: &dyn ChatBackend,
    agent: &AgentConfig,
    exec: &ExecConfig,
) -> HeadroomReport {
    let mut report = HeadroomReport { rate: 0.0, n: 0, corrected: 0, cases: Vec::new(), skipped: Vec::new() };
    for (task, record) in pairs.iter().filter(|(_, r)| r.ex_correct == Some(false)) {
        let skip = |reason: &str| (task.task_id.clone(), reason.to_string());
        let Some(gold) = task.gold_sql.as_deref() else {
            report.skipped.push(skip("no gold SQL"));
            continue;
        };
        let Some(initial) = record.drafts.first() else {
            report.skipped.push(skip("no initial draft"));
            continue;
        };
        match rerun_one(task, gold, &initial.sql, db_root, backend, agent, exec) {
            Ok(case) => {
                report.n += 1;
                report.corrected += case.corrected as usize;
                report.cases.push(case);
            }
            Err(reason) => {
                warn!(task = %task.task_id, %reason, "headroom rerun skipped");
                report.skipped.push(skip(&reason));
            }
        }
    }
    report.rate = percent(report.corrected, report.n);
    report
}

fn rerun_one(
    task: &Task,
    gold: &str,
    initial_sql: &str,
    db_root: &Path,
    backend: &dyn ChatBackend,
    agent: &AgentConfig,
    exec: &ExecConfig,
) -> Result<HeadroomCase, String> {
    let db = DatabaseHandle::open_in(db_root, &task.db_id, *exec).map_err(|e| e.to_string())?;
    let schema = db.schema().map_err(|e| e.to_string())?;
    let ast = parse_sql(gold).map_err(|e| format!("gold SQL does not parse: {e}"))?;
    let oracle = derive_constraints_from_sql_with(&ast, Some(&schema));
    let ctx = TaskContext { task, schema: &schema, db: &db };
    let mut session = Session::new(backend, agent);
    let outcome =
        repair_loop(ctx, &oracle, initial_sql, &mut session, agent.max_repairs).map_err(|e| e.to_string())?;
    let corrected = execution_accuracy(&outcome.final_sql, gold, &db).map_err(|e| e.to_string())?;
    Ok(HeadroomCase {
        task_id: task.task_id.clone(),
        oracle_constraints: oracle.iter().map(|c| c.to_string()).collect(),
        final_sql: outcome.final_sql,
        repair_count: outcome.repair_count,
        corrected,
    })
}
