//! Domain types shared across the pipeline.
//!
//! Every type here is a plain value object with a canonical JSON encoding
//! (field names as declared). Traces and CLI output are built from these.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Benchmark difficulty label. Spider tasks carry no label and map to `Unknown`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Simple,
    Moderate,
    Challenging,
    #[default]
    Unknown,
}

impl Difficulty {
    pub fn parse_label(s: &str) -> Self {
        match s.trim().to_ascii_lowercase().as_str() {
            "simple" => Self::Simple,
            "moderate" => Self::Moderate,
            "challenging" => Self::Challenging,
            _ => Self::Unknown,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Simple => "simple",
            Self::Moderate => "moderate",
            Self::Challenging => "challenging",
            Self::Unknown => "unknown",
        }
    }
}

/// One benchmark item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub task_id: String,
    pub db_id: String,
    pub question: String,
    #[serde(default)]
    pub evidence: String,
    #[serde(default)]
    pub gold_sql: Option<String>,
    #[serde(default)]
    pub difficulty: Difficulty,
}

impl Task {
    pub fn new(task_id: impl Into<String>, db_id: impl Into<String>, question: impl Into<String>) -> Self {
        Self {
            task_id: task_id.into(),
            db_id: db_id.into(),
            question: question.into(),
            evidence: String::new(),
            gold_sql: None,
            difficulty: Difficulty::Unknown,
        }
    }

    pub fn with_evidence(mut self, evidence: impl Into<String>) -> Self {
        self.evidence = evidence.into();
        self
    }

    pub fn with_gold(mut self, gold: impl Into<String>) -> Self {
        self.gold_sql = Some(gold.into());
        self
    }

    /// Checks the invariants that do not need a database.
    pub fn validate(&self) -> Result<(), String> {
        if self.question.trim().is_empty() {
            return Err(format!("task {}: question is empty", self.task_id));
        }
        if self.db_id.trim().is_empty() {
            return Err(format!("task {}: db_id is empty", self.task_id));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnInfo {
    pub column_name: String,
    pub declared_type: String,
    pub is_primary_key: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableInfo {
    pub table_name: String,
    pub columns: Vec<ColumnInfo>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForeignKey {
    pub from_table: String,
    pub from_column: String,
    pub to_table: String,
    pub to_column: String,
}

/// Database schema as read from the SQLite catalog.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaDescription {
    pub tables: Vec<TableInfo>,
    pub foreign_keys: Vec<ForeignKey>,
}

impl SchemaDescription {
    pub fn table(&self, name: &str) -> Option<&TableInfo> {
        self.tables.iter().find(|t| t.table_name.eq_ignore_ascii_case(name))
    }

    /// Declared types of every column with this name, across all tables.
    pub fn declared_types<'a>(&'a self, column: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.tables
            .iter()
            .flat_map(|t| t.columns.iter())
            .filter(move |c| c.column_name.eq_ignore_ascii_case(column))
            .map(|c| c.declared_type.as_str())
    }
}

/// The eleven verifiable constraint kinds, in verification order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConstraintKind {
    Distinct,
    TopK,
    Ranking,
    Count,
    Percent,
    Sum,
    Average,
    Extreme,
    Temporal,
    Compare,
    LiteralPresence,
}

impl ConstraintKind {
    pub const ALL: [ConstraintKind; 11] = [
        Self::Distinct,
        Self::TopK,
        Self::Ranking,
        Self::Count,
        Self::Percent,
        Self::Sum,
        Self::Average,
        Self::Extreme,
        Self::Temporal,
        Self::Compare,
        Self::LiteralPresence,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Distinct => "Distinct",
            Self::TopK => "TopK",
            Self::Ranking => "Ranking",
            Self::Count => "Count",
            Self::Percent => "Percent",
            Self::Sum => "Sum",
            Self::Average => "Average",
            Self::Extreme => "Extreme",
            Self::Temporal => "Temporal",
            Self::Compare => "Compare",
            Self::LiteralPresence => "LiteralPresence",
        }
    }
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Comparison direction of a `Compare` constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CompareOp {
    Gt,
    GtEq,
    Lt,
    LtEq,
}

impl CompareOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            Self::Gt => ">",
            Self::GtEq => ">=",
            Self::Lt => "<",
            Self::LtEq => "<=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        match s {
            ">" => Some(Self::Gt),
            ">=" => Some(Self::GtEq),
            "<" => Some(Self::Lt),
            "<=" => Some(Self::LtEq),
            _ => None,
        }
    }

    /// The operator that holds when the operands are swapped (`a > b` ⇔ `b < a`).
    pub fn mirrored(&self) -> Self {
        match self {
            Self::Gt => Self::Lt,
            Self::GtEq => Self::LtEq,
            Self::Lt => Self::Gt,
            Self::LtEq => Self::GtEq,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Extremum {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Recency {
    Latest,
    Earliest,
}

/// Kind-specific constraint parameter.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConstraintParam {
    Limit(u32),
    Compare(CompareOp),
    Extremum(Extremum),
    Recency(Recency),
    Literal(String),
}

impl ConstraintParam {
    fn to_json(&self) -> Value {
        match self {
            Self::Limit(n) => Value::from(*n),
            Self::Compare(op) => Value::from(op.symbol()),
            Self::Extremum(Extremum::Max) => Value::from("max"),
            Self::Extremum(Extremum::Min) => Value::from("min"),
            Self::Recency(Recency::Latest) => Value::from("latest"),
            Self::Recency(Recency::Earliest) => Value::from("earliest"),
            Self::Literal(s) => Value::from(s.as_str()),
        }
    }

    fn from_json(kind: ConstraintKind, v: &Value) -> Result<Option<Self>, String> {
        if v.is_null() {
            return Ok(None);
        }
        let bad = || format!("invalid param {v} for {kind}");
        let p = match kind {
            ConstraintKind::TopK => {
                let n = v.as_u64().filter(|n| *n >= 1 && *n <= u32::MAX as u64).ok_or_else(bad)?;
                Self::Limit(n as u32)
            }
            ConstraintKind::Compare => {
                Self::Compare(v.as_str().and_then(CompareOp::from_symbol).ok_or_else(bad)?)
            }
            ConstraintKind::Extreme => match v.as_str() {
                Some("max") => Self::Extremum(Extremum::Max),
                Some("min") => Self::Extremum(Extremum::Min),
                _ => return Err(bad()),
            },
            ConstraintKind::Temporal => match v.as_str() {
                Some("latest") => Self::Recency(Recency::Latest),
                Some("earliest") => Self::Recency(Recency::Earliest),
                _ => return Err(bad()),
            },
            ConstraintKind::LiteralPresence => {
                let s = v.as_str().filter(|s| !s.is_empty()).ok_or_else(bad)?;
                Self::Literal(s.to_string())
            }
            _ => return Err(bad()),
        };
        Ok(Some(p))
    }
}

/// A verifiable predicate extracted from the question.
///
/// `trigger` is the first matched substring; `also_triggered_by` holds the
/// triggers of duplicates merged into this constraint.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawConstraint", into = "RawConstraint")]
pub struct Constraint {
    pub kind: ConstraintKind,
    pub param: Option<ConstraintParam>,
    pub trigger: String,
    pub also_triggered_by: Vec<String>,
}

impl Constraint {
    pub fn new(kind: ConstraintKind, param: Option<ConstraintParam>, trigger: impl Into<String>) -> Self {
        Self { kind, param, trigger: trigger.into(), also_triggered_by: Vec::new() }
    }

    pub fn simple(kind: ConstraintKind, trigger: impl Into<String>) -> Self {
        Self::new(kind, None, trigger)
    }

    pub fn top_k(n: u32, trigger: impl Into<String>) -> Self {
        Self::new(ConstraintKind::TopK, Some(ConstraintParam::Limit(n)), trigger)
    }

    pub fn compare(op: CompareOp, trigger: impl Into<String>) -> Self {
        Self::new(ConstraintKind::Compare, Some(ConstraintParam::Compare(op)), trigger)
    }

    pub fn extreme(dir: Extremum, trigger: impl Into<String>) -> Self {
        Self::new(ConstraintKind::Extreme, Some(ConstraintParam::Extremum(dir)), trigger)
    }

    pub fn temporal(dir: Recency, trigger: impl Into<String>) -> Self {
        Self::new(ConstraintKind::Temporal, Some(ConstraintParam::Recency(dir)), trigger)
    }

    pub fn literal(value: impl Into<String>, trigger: impl Into<String>) -> Self {
        Self::new(ConstraintKind::LiteralPresence, Some(ConstraintParam::Literal(value.into())), trigger)
    }

    /// Identity used for deduplication and ordering.
    pub fn key(&self) -> (ConstraintKind, Option<&ConstraintParam>) {
        (self.kind, self.param.as_ref())
    }

    pub fn limit(&self) -> Option<u32> {
        match self.param {
            Some(ConstraintParam::Limit(n)) => Some(n),
            _ => None,
        }
    }

    pub fn literal_value(&self) -> Option<&str> {
        match &self.param {
            Some(ConstraintParam::Literal(s)) => Some(s),
            _ => None,
        }
    }

    /// Short requirement text used in generation prompts.
    pub fn describe(&self) -> String {
        match (&self.kind, &self.param) {
            (ConstraintKind::Distinct, _) => "needs DISTINCT or GROUP BY (unique values)".into(),
            (ConstraintKind::TopK, Some(ConstraintParam::Limit(n))) => {
                format!("needs ORDER BY ... LIMIT {n}")
            }
            (ConstraintKind::Ranking, _) => {
                "needs a ranking window function (RANK/DENSE_RANK/ROW_NUMBER ... OVER)".into()
            }
            (ConstraintKind::Count, _) => "needs COUNT".into(),
            (ConstraintKind::Percent, _) => {
                "needs a percentage/ratio computation (division, CAST to REAL)".into()
            }
            (ConstraintKind::Sum, _) => "needs SUM".into(),
            (ConstraintKind::Average, _) => "needs AVG".into(),
            (ConstraintKind::Extreme, Some(ConstraintParam::Extremum(Extremum::Min))) => {
                "needs MIN or ORDER BY ... ASC LIMIT 1".into()
            }
            (ConstraintKind::Extreme, _) => "needs MAX or ORDER BY ... DESC LIMIT 1".into(),
            (ConstraintKind::Temporal, Some(ConstraintParam::Recency(Recency::Earliest))) => {
                "needs ORDER BY a date/time column ASC (earliest first)".into()
            }
            (ConstraintKind::Temporal, _) => {
                "needs ORDER BY a date/time column DESC (latest first)".into()
            }
            (ConstraintKind::Compare, Some(ConstraintParam::Compare(op))) => {
                format!("needs a `{}` comparison in WHERE or HAVING", op.symbol())
            }
            (ConstraintKind::LiteralPresence, Some(ConstraintParam::Literal(v))) => {
                format!("the value \"{v}\" must appear in the SQL")
            }
            (kind, _) => format!("needs {kind}"),
        }
    }
}

impl PartialEq for Constraint {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key() && self.trigger == other.trigger && self.also_triggered_by == other.also_triggered_by
    }
}

impl Eq for Constraint {}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.param {
            None => write!(f, "{}", self.kind),
            Some(p) => write!(f, "{}({})", self.kind, p.to_json().to_string().trim_matches('"')),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawConstraint {
    kind: ConstraintKind,
    #[serde(default)]
    param: Value,
    #[serde(default)]
    trigger: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    also_triggered_by: Vec<String>,
}

impl TryFrom<RawConstraint> for Constraint {
    type Error = String;

    fn try_from(raw: RawConstraint) -> Result<Self, Self::Error> {
        let param = ConstraintParam::from_json(raw.kind, &raw.param)?;
        if raw.kind == ConstraintKind::LiteralPresence && param.is_none() {
            return Err("LiteralPresence requires a non-empty param".into());
        }
        Ok(Self { kind: raw.kind, param, trigger: raw.trigger, also_triggered_by: raw.also_triggered_by })
    }
}

impl From<Constraint> for RawConstraint {
    fn from(c: Constraint) -> Self {
        Self {
            kind: c.kind,
            param: c.param.as_ref().map(ConstraintParam::to_json).unwrap_or(Value::Null),
            trigger: c.trigger,
            also_triggered_by: c.also_triggered_by,
        }
    }
}

/// Which verification stage produced a violation.
///
/// `Llm` is only produced by the LLM-verifier ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationSource {
    Syntax,
    Execution,
    Constraint,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub source: ViolationSource,
    #[serde(default)]
    pub constraint: Option<Constraint>,
    pub message: String,
}

impl Violation {
    pub fn syntax(message: impl Into<String>) -> Self {
        Self { source: ViolationSource::Syntax, constraint: None, message: message.into() }
    }

    pub fn execution(message: impl Into<String>) -> Self {
        Self { source: ViolationSource::Execution, constraint: None, message: message.into() }
    }

    pub fn constraint(c: Constraint, message: impl Into<String>) -> Self {
        Self { source: ViolationSource::Constraint, constraint: Some(c), message: message.into() }
    }

    pub fn llm(message: impl Into<String>) -> Self {
        Self { source: ViolationSource::Llm, constraint: None, message: message.into() }
    }

    /// Identity of the violated requirement across drafts. Syntax and
    /// execution failures are keyed by stage alone, constraint violations
    /// by the constraint's (kind, param), LLM findings by their text.
    pub fn identity(&self) -> String {
        match (&self.source, &self.constraint) {
            (ViolationSource::Constraint, Some(c)) => format!("constraint:{c}"),
            (ViolationSource::Llm, _) => format!("llm:{}", self.message),
            (ViolationSource::Syntax, _) => "syntax".into(),
            (ViolationSource::Execution, _) => "execution".into(),
            (ViolationSource::Constraint, None) => format!("constraint:?{}", self.message),
        }
    }
}

/// A single database cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CellValue {
    Null,
    Int(i64),
    Real(f64),
    Text(String),
    Blob { blob_hex: String },
}

impl CellValue {
    pub fn render(&self) -> String {
        match self {
            Self::Null => "NULL".into(),
            Self::Int(i) => i.to_string(),
            Self::Real(r) => r.to_string(),
            Self::Text(s) => s.clone(),
            Self::Blob { blob_hex } => format!("x'{blob_hex}'"),
        }
    }
}

/// Rows returned by one execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecResult {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<CellValue>>,
    pub truncated: bool,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeResult {
    Rows(ExecResult),
    Error(String),
}

/// One executed probe (p_t, r_t) and what the model said it learned from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub probe_sql: String,
    pub result: ProbeResult,
    #[serde(default)]
    pub relevant_columns: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub value_mappings: BTreeMap<String, String>,
}

/// Accumulated probe knowledge (H and G).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundingContext {
    pub probes: Vec<ProbeRecord>,
    pub merged_value_mappings: BTreeMap<String, String>,
    pub merged_relevant_columns: BTreeMap<String, Vec<String>>,
    pub insights: String,
}

impl GroundingContext {
    pub fn is_empty(&self) -> bool {
        self.probes.is_empty()
            && self.merged_value_mappings.is_empty()
            && self.merged_relevant_columns.is_empty()
            && self.insights.is_empty()
    }

    /// Appends a probe and folds its maps into the merged view; later
    /// entries override earlier ones.
    pub fn push_probe(&mut self, record: ProbeRecord) {
        for (term, value) in &record.value_mappings {
            self.merged_value_mappings.insert(term.clone(), value.clone());
        }
        for (table, cols) in &record.relevant_columns {
            self.merged_relevant_columns.insert(table.clone(), cols.clone());
        }
        self.probes.push(record);
    }

    /// Folds maps reported after the last probe ran (for example with a
    /// "done" decision) into that probe's record. Ignored with no probes.
    pub fn annotate_last_probe(
        &mut self,
        relevant_columns: &BTreeMap<String, Vec<String>>,
        value_mappings: &BTreeMap<String, String>,
    ) -> bool {
        let Some(last) = self.probes.last_mut() else { return false };
        last.relevant_columns.extend(relevant_columns.iter().map(|(k, v)| (k.clone(), v.clone())));
        last.value_mappings.extend(value_mappings.iter().map(|(k, v)| (k.clone(), v.clone())));
        self.merged_relevant_columns.extend(relevant_columns.iter().map(|(k, v)| (k.clone(), v.clone())));
        self.merged_value_mappings.extend(value_mappings.iter().map(|(k, v)| (k.clone(), v.clone())));
        true
    }

    pub fn add_insight(&mut self, text: &str) {
        let text = text.trim();
        if text.is_empty() {
            return;
        }
        if !self.insights.is_empty() {
            self.insights.push('\n');
        }
        self.insights.push_str(text);
    }
}

/// One SQL draft and the violations found when it was verified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draft {
    pub sql: String,
    pub violations: Vec<Violation>,
}

/// Which parts of the pipeline are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Rule,
    LlmVerify,
    NoProbe,
    NoRepair,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rule" => Ok(Self::Rule),
            "llm_verify" => Ok(Self::LlmVerify),
            "no_probe" => Ok(Self::NoProbe),
            "no_repair" => Ok(Self::NoRepair),
            other => Err(format!("unknown mode `{other}` (expected rule|llm_verify|no_probe|no_repair)")),
        }
    }
}

/// Free-form constraint produced by the LLM extraction ablation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmConstraint {
    #[serde(rename = "type", default)]
    pub kind: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub sql_hint: String,
}

/// Per-task pipeline trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub task_id: String,
    #[serde(default)]
    pub mode: Mode,
    pub grounding: GroundingContext,
    #[serde(default)]
    pub constraints: Vec<Constraint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub llm_constraints: Vec<LlmConstraint>,
    pub drafts: Vec<Draft>,
    pub final_sql: String,
    pub probe_count: usize,
    pub repair_count: usize,
    pub llm_calls: usize,
    pub tokens_in: u64,
    pub tokens_out: u64,
    #[serde(default)]
    pub tokens_estimated: bool,
    pub wall_seconds: f64,
    #[serde(default)]
    pub failed: bool,
    #[serde(default)]
    pub error: Option<String>,
    /// Execution-accuracy verdict, filled in by the benchmark harness.
    #[serde(default)]
    pub ex_correct: Option<bool>,
}

impl RunRecord {
    pub fn empty(task_id: impl Into<String>, mode: Mode) -> Self {
        Self {
            task_id: task_id.into(),
            mode,
            grounding: GroundingContext::default(),
            constraints: Vec::new(),
            llm_constraints: Vec::new(),
            drafts: Vec::new(),
            final_sql: String::new(),
            probe_count: 0,
            repair_count: 0,
            llm_calls: 0,
            tokens_in: 0,
            tokens_out: 0,
            tokens_estimated: false,
            wall_seconds: 0.0,
            failed: false,
            error: None,
            ex_correct: None,
        }
    }

    pub fn final_violations(&self) -> &[Violation] {
        self.drafts.iter().rev().find(|d| d.sql == self.final_sql).map(|d| d.violations.as_slice()).unwrap_or(&[])
    }

    /// The record with wall-clock fields zeroed, for replay comparisons.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        r.wall_seconds = 0.0;
        for p in &mut r.grounding.probes {
            if let ProbeResult::Rows(rows) = &mut p.result {
                rows.elapsed_seconds = 0.0;
            }
        }
        r
    }
}

/// Root-cause class assigned by the error judge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ErrorKind {
    #[serde(rename = "DATABASE_MISINTERPRETATION")]
    DatabaseMisinterpretation,
    #[serde(rename = "QUESTION_MISINTERPRETATION")]
    QuestionMisinterpretation,
    #[serde(rename = "SQL_SYNTHESIS_FAILURE")]
    SynthesisFailure,
}

impl ErrorKind {
    pub fn parse_label(s: &str) -> Option<Self> {
        let norm = s.trim().to_ascii_uppercase().replace([' ', '-'], "_");
        match norm.as_str() {
            "DATABASE_MISINTERPRETATION" => Some(Self::DatabaseMisinterpretation),
            "QUESTION_MISINTERPRETATION" => Some(Self::QuestionMisinterpretation),
            "SQL_SYNTHESIS_FAILURE" | "SYNTHESIS_FAILURE" => Some(Self::SynthesisFailure),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorClass {
    pub kind: ErrorKind,
    pub reasoning: String,
    pub specific_issue: String,
}
