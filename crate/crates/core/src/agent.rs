//! The probe → extract → generate → verify/repair loop.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, info, warn};

use crate::executor::{DatabaseHandle, ExecError};
use crate::extractor::{extract_constraints, literals_from_mappings, union};
use crate::llm::{
    self, base_vars, parse_llm_constraints, parse_llm_verification, parse_probe_decision, parse_sql_answer,
    render_constraints, render_grounding, render_probe_history, render_prompt, render_violations, ChatBackend,
    ChatRequest, LlmError, ProbeAction, PromptKind,
};
use crate::sqlcheck::{check_all_with, parse_sql};
use crate::types::{
    Constraint, Draft, GroundingContext, LlmConstraint, Mode, RunRecord, SchemaDescription, Task, Violation,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    /// K: probe budget.
    pub max_probes: usize,
    /// M: repair budget.
    pub max_repairs: usize,
    pub mode: Mode,
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self { max_probes: 5, max_repairs: 5, mode: Mode::Rule, temperature: 0.0, max_output_tokens: 2048 }
    }
}

impl AgentConfig {
    pub fn effective_probes(&self) -> usize {
        if self.mode == Mode::NoProbe {
            0
        } else {
            self.max_probes
        }
    }

    pub fn effective_repairs(&self) -> usize {
        if self.mode == Mode::NoRepair {
            0
        } else {
            self.max_repairs
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Db(#[from] ExecError),
    #[error("invalid task: {0}")]
    InvalidTask(String),
}

/// Counts backend calls and tokens for one task.
pub struct Session<'a> {
    backend: &'a dyn ChatBackend,
    temperature: f64,
    max_output_tokens: u32,
    pub calls: usize,
    pub tokens_in: u64,
    pub tokens_out: u64,
    pub estimated: bool,
}

impl<'a> Session<'a> {
    pub fn new(backend: &'a dyn ChatBackend, config: &AgentConfig) -> Self {
        Self {
            backend,
            temperature: config.temperature,
            max_output_tokens: config.max_output_tokens,
            calls: 0,
            tokens_in: 0,
            tokens_out: 0,
            estimated: false,
        }
    }

    /// One backend round trip. Failed calls still count toward `calls`.
    pub fn call(&mut self, kind: PromptKind, text: String) -> Result<String, LlmError> {
        debug!(?kind, prompt = %text, "llm request");
        let request =
            ChatRequest { kind, text, temperature: self.temperature, max_output_tokens: self.max_output_tokens };
        self.calls += 1;
        let resp = self.backend.complete(&request)?;
        self.tokens_in += resp.tokens_in;
        self.tokens_out += resp.tokens_out;
        self.estimated |= resp.estimated;
        debug!(?kind, response = %resp.text, "llm response");
        Ok(resp.text)
    }

    /// Calls until a SQL statement can be parsed out, retrying once on an
    /// empty answer.
    fn call_for_sql(&mut self, kind: PromptKind, text: String) -> Result<String, LlmError> {
        match parse_sql_answer(&self.call(kind, text.clone())?) {
            Err(LlmError::EmptyAnswer) => {
                warn!(?kind, "no SQL in answer, retrying once");
                parse_sql_answer(&self.call(kind, text)?)
            }
            other => other,
        }
    }
}

/// Task inputs shared by every stage.
#[derive(Clone, Copy)]
pub struct TaskContext<'a> {
    pub task: &'a Task,
    pub schema: &'a SchemaDescription,
    pub db: &'a DatabaseHandle,
}

/// Up to `k` probe rounds. Unparseable decisions end the loop like "done".
/// Returns the grounding and the number of probe rounds used.
pub fn run_probe_loop(
    ctx: TaskContext<'_>,
    session: &mut Session<'_>,
    k: usize,
) -> Result<(GroundingContext, usize), AgentError> {
    let mut g = GroundingContext::default();
    let mut used = 0;
    while used < k {
        let mut vars = base_vars(&ctx.task.question, &ctx.task.evidence, ctx.schema);
        vars.insert("prior_probe_results", render_probe_history(&g.probes));
        let text = session.call(PromptKind::Probe, render_prompt(PromptKind::Probe, &vars)?)?;
        let decision = match parse_probe_decision(&text) {
            Ok(d) => d,
            Err(e) => {
                info!(task = %ctx.task.task_id, error = %e, "probe decision unparseable, proceeding to generation");
                break;
            }
        };
        if let Some(insight) = &decision.insight {
            g.add_insight(insight);
        }
        if decision.action == ProbeAction::Done {
            g.annotate_last_probe(&decision.relevant_columns, &decision.value_mappings);
            info!(task = %ctx.task.task_id, probes = used, "probing done");
            break;
        }
        used += 1;
        let sql = decision.probe_sql.unwrap_or_default();
        match ctx.db.execute_probe(&sql) {
            Ok(mut record) => {
                record.relevant_columns = decision.relevant_columns;
                record.value_mappings = decision.value_mappings;
                info!(task = %ctx.task.task_id, round = used, probe = %sql, ok = matches!(record.result, crate::types::ProbeResult::Rows(_)), "probe issued");
                g.push_probe(record);
            }
            Err(ExecError::NotASelect) => {
                info!(task = %ctx.task.task_id, round = used, probe = %sql, "probe rejected: not a SELECT");
                g.add_insight(&format!("Probe rejected (only SELECT probes run): {sql}"));
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok((g, used))
}

/// Rule-mode constraint set: extracted rules plus literals for every probed
/// value whose question term occurs in the question or evidence.
pub fn constraints_for(task: &Task, grounding: &GroundingContext) -> Vec<Constraint> {
    let extracted = extract_constraints(&task.question, &task.evidence);
    let literals = literals_from_mappings(&task.question, &task.evidence, &grounding.merged_value_mappings);
    union(&extracted, &literals)
}

pub fn generate_sql(
    ctx: TaskContext<'_>,
    grounding: &GroundingContext,
    constraints: &str,
    session: &mut Session<'_>,
) -> Result<String, AgentError> {
    let mut vars = base_vars(&ctx.task.question, &ctx.task.evidence, ctx.schema);
    vars.insert("probe_results", render_grounding(grounding));
    vars.insert("constraints", constraints.to_string());
    let prompt = render_prompt(PromptKind::Generate, &vars)?;
    Ok(session.call_for_sql(PromptKind::Generate, prompt)?)
}

/// Syntax and execution stages. The flag is set when the syntax stage
/// failed, in which case nothing was executed and constraint checks are
/// skipped.
fn engine_stages(sql: &str, db: &DatabaseHandle) -> Result<(Vec<Violation>, bool), ExecError> {
    if let Some(v) = db.syntax_check(sql) {
        return Ok((vec![v], true));
    }
    if let Err(e) = parse_sql(sql) {
        return Ok((vec![Violation::syntax(e.to_string())], true));
    }
    match db.execute(sql, None) {
        Ok(_) => Ok((Vec::new(), false)),
        Err(ExecError::DbUnavailable(m)) => Err(ExecError::DbUnavailable(m)),
        Err(e) => Ok((e.to_violation().into_iter().collect(), false)),
    }
}

/// Syntax, then execution, then constraint checks. A syntax failure
/// returns only that violation and never touches the database.
pub fn verify_sql(
    sql: &str,
    constraints: &[Constraint],
    db: &DatabaseHandle,
    schema: Option<&SchemaDescription>,
) -> Result<Vec<Violation>, ExecError> {
    let (mut found, syntax_failed) = engine_stages(sql, db)?;
    if syntax_failed {
        return Ok(found);
    }
    let ast = parse_sql(sql).expect("parsed in the syntax stage");
    found.extend(check_all_with(&ast, constraints, schema));
    Ok(found)
}

/// Result of the verify/repair loop.
#[derive(Debug, Clone, PartialEq)]
pub struct RepairOutcome {
    pub drafts: Vec<Draft>,
    pub final_sql: String,
    pub repair_count: usize,
    /// Set when the backend failed mid-loop; `final_sql` is then the best
    /// draft so far.
    pub error: Option<String>,
}

/// Draft with the fewest violations, earliest on ties.
pub fn best_draft(drafts: &[Draft]) -> Option<&Draft> {
    drafts.iter().enumerate().min_by_key(|(i, d)| (d.violations.len(), *i)).map(|(_, d)| d)
}

/// Verify-and-repair with the rule verifier.
pub fn repair_loop(
    ctx: TaskContext<'_>,
    constraints: &[Constraint],
    initial_sql: &str,
    session: &mut Session<'_>,
    m: usize,
) -> Result<RepairOutcome, AgentError> {
    let mut verify = |sql: &str, _: &mut Session<'_>| -> Result<Vec<Violation>, AgentError> {
        Ok(verify_sql(sql, constraints, ctx.db, Some(ctx.schema))?)
    };
    repair_loop_with(ctx, initial_sql, session, m, &mut verify)
}

type Verifier<'v> = dyn FnMut(&str, &mut Session<'_>) -> Result<Vec<Violation>, AgentError> + 'v;

fn repair_loop_with(
    ctx: TaskContext<'_>,
    initial_sql: &str,
    session: &mut Session<'_>,
    m: usize,
    verify: &mut Verifier<'_>,
) -> Result<RepairOutcome, AgentError> {
    let task = &ctx.task.task_id;
    let violations = verify(initial_sql, session)?;
    info!(task = %task, violations = violations.len(), "initial verification");
    let mut drafts = vec![Draft { sql: initial_sql.to_string(), violations }];
    let mut rounds = 0;
    let mut error = None;
    while rounds < m {
        let last = drafts.last().unwrap();
        if last.violations.is_empty() {
            break;
        }
        let mut vars = base_vars(&ctx.task.question, &ctx.task.evidence, ctx.schema);
        vars.insert("original_sql", last.sql.clone());
        vars.insert("violation_messages", render_violations(&last.violations));
        let prompt = render_prompt(PromptKind::Repair, &vars)?;
        let sql = match session.call_for_sql(PromptKind::Repair, prompt) {
            Ok(sql) => sql,
            Err(e) => {
                warn!(task = %task, round = rounds + 1, error = %e, "repair call failed, keeping best draft");
                error = Some(e.to_string());
                break;
            }
        };
        rounds += 1;
        let violations = verify(&sql, session)?;
        info!(task = %task, round = rounds, violations = violations.len(), "repair round");
        drafts.push(Draft { sql, violations });
    }
    let final_sql = if error.is_some() {
        best_draft(&drafts).unwrap().sql.clone()
    } else {
        drafts.last().unwrap().sql.clone()
    };
    Ok(RepairOutcome { drafts, final_sql, repair_count: rounds, error })
}

fn render_llm_constraints(cs: &[LlmConstraint]) -> String {
    let lines: Vec<String> = cs
        .iter()
        .map(|c| {
            let mut l = format!("- {}: {}", c.kind, c.description);
            if !c.sql_hint.is_empty() {
                l.push_str(&format!(" (hint: {})", c.sql_hint));
            }
            l
        })
        .collect();
    if lines.is_empty() {
        llm::NONE_MARKER.to_string()
    } else {
        lines.join("\n")
    }
}

fn llm_extract(ctx: TaskContext<'_>, session: &mut Session<'_>) -> Result<Vec<LlmConstraint>, AgentError> {
    let mut vars = llm::PromptVars::new();
    vars.insert("question", ctx.task.question.clone());
    vars.insert("evidence", if ctx.task.evidence.trim().is_empty() { llm::NONE_MARKER.into() } else { ctx.task.evidence.clone() });
    let text = session.call(PromptKind::LlmExtract, render_prompt(PromptKind::LlmExtract, &vars)?)?;
    Ok(parse_llm_constraints(&text).unwrap_or_else(|e| {
        warn!(task = %ctx.task.task_id, error = %e, "LLM constraint extraction unparseable");
        Vec::new()
    }))
}

fn llm_verify(
    ctx: TaskContext<'_>,
    constraints: &str,
    sql: &str,
    session: &mut Session<'_>,
) -> Result<Vec<Violation>, AgentError> {
    let (mut found, syntax_failed) = engine_stages(sql, ctx.db)?;
    if syntax_failed {
        return Ok(found);
    }
    let mut vars = base_vars(&ctx.task.question, &ctx.task.evidence, ctx.schema);
    vars.insert("constraints", constraints.to_string());
    vars.insert("sql", sql.to_string());
    let text = session.call(PromptKind::LlmVerify, render_prompt(PromptKind::LlmVerify, &vars)?)?;
    match parse_llm_verification(&text) {
        Ok(verdict) => found.extend(verdict.blocking_issues().map(|i| {
            let mut msg = if i.description.is_empty() { i.category.clone() } else { i.description.clone() };
            if !i.suggestion.is_empty() {
                msg.push_str(&format!(" (suggestion: {})", i.suggestion));
            }
            Violation::llm(if msg.is_empty() { "issue flagged by LLM verifier".into() } else { msg })
        })),
        Err(e) => warn!(task = %ctx.task.task_id, error = %e, "LLM verification unparseable, treating as valid"),
    }
    Ok(found)
}

/// Full pipeline for one task. Errors never escape: they mark the record
/// failed with the message.
pub fn run_task(task: &Task, db: &DatabaseHandle, backend: &dyn ChatBackend, config: &AgentConfig) -> RunRecord {
    let start = Instant::now();
    let mut record = RunRecord::empty(&task.task_id, config.mode);
    let mut session = Session::new(backend, config);
    if let Err(e) = run_stages(task, db, config, &mut session, &mut record) {
        warn!(task = %task.task_id, error = %e, "task failed");
        record.failed = true;
        record.error = Some(e.to_string());
    }
    record.llm_calls = session.calls;
    record.tokens_in = session.tokens_in;
    record.tokens_out = session.tokens_out;
    record.tokens_estimated = session.estimated;
    record.wall_seconds = start.elapsed().as_secs_f64();
    info!(
        task = %task.task_id,
        probes = record.probe_count,
        repairs = record.repair_count,
        calls = record.llm_calls,
        failed = record.failed,
        "task finished"
    );
    record
}

fn run_stages(
    task: &Task,
    db: &DatabaseHandle,
    config: &AgentConfig,
    session: &mut Session<'_>,
    record: &mut RunRecord,
) -> Result<(), AgentError> {
    task.validate().map_err(AgentError::InvalidTask)?;
    let schema = db.schema()?;
    let ctx = TaskContext { task, schema: &schema, db };

    let (grounding, probes) = run_probe_loop(ctx, session, config.effective_probes())?;
    record.grounding = grounding;
    record.probe_count = probes;

    let outcome = if config.mode == Mode::LlmVerify {
        let llm_constraints = llm_extract(ctx, session)?;
        let rendered = render_llm_constraints(&llm_constraints);
        record.llm_constraints = llm_constraints;
        let sql = generate_sql(ctx, &record.grounding, &rendered, session)?;
        let mut verify = |s: &str, sess: &mut Session<'_>| llm_verify(ctx, &rendered, s, sess);
        repair_loop_with(ctx, &sql, session, config.effective_repairs(), &mut verify)?
    } else {
        record.constraints = constraints_for(task, &record.grounding);
        info!(task = %task.task_id, constraints = record.constraints.len(), "constraints extracted");
        let sql = generate_sql(ctx, &record.grounding, &render_constraints(&record.constraints), session)?;
        repair_loop(ctx, &record.constraints, &sql, session, config.effective_repairs())?
    };
    record.drafts = outcome.drafts;
    record.final_sql = outcome.final_sql;
    record.repair_count = outcome.repair_count;
    record.error = outcome.error;
    Ok(())
}
