//! Tolerant parsing of model output: JSON objects buried in prose or code
//! fences, and bare SQL answers.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::LlmError;
use crate::types::{ErrorClass, ErrorKind, LlmConstraint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeAction {
    Probe,
    Done,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeDecision {
    pub action: ProbeAction,
    pub probe_sql: Option<String>,
    #[serde(default)]
    pub relevant_columns: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub value_mappings: BTreeMap<String, String>,
    /// Free-text observation, when the model volunteers one.
    #[serde(default)]
    pub insight: Option<String>,
}

/// The first JSON object in `text`, skipping any surrounding prose.
pub fn first_json_object(text: &str) -> Option<Map<String, Value>> {
    for (i, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(map))) = stream.next() {
            return Some(map);
        }
    }
    None
}

fn scalar_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn string_list(v: &Value) -> Vec<String> {
    match v {
        Value::Array(items) => items.iter().filter_map(scalar_string).collect(),
        other => scalar_string(other).into_iter().collect(),
    }
}

pub fn parse_probe_decision(text: &str) -> Result<ProbeDecision, LlmError> {
    let obj = first_json_object(text).ok_or_else(|| LlmError::Unparseable("no JSON object in probe decision".into()))?;
    let probe_sql = obj.get("probe_sql").and_then(Value::as_str).map(str::trim).filter(|s| !s.is_empty()).map(String::from);
    let action = match obj.get("action").and_then(Value::as_str).map(|s| s.trim().to_ascii_lowercase()) {
        Some(a) if a == "done" => ProbeAction::Done,
        Some(a) if a == "probe" => ProbeAction::Probe,
        Some(other) => return Err(LlmError::Unparseable(format!("unknown probe action `{other}`"))),
        None => return Err(LlmError::Unparseable("probe decision lacks an action".into())),
    };
    if action == ProbeAction::Probe && probe_sql.is_none() {
        return Err(LlmError::Unparseable("action is probe but probe_sql is missing".into()));
    }
    let relevant_columns = match obj.get("relevant_columns") {
        Some(Value::Object(m)) => m.iter().map(|(k, v)| (k.clone(), string_list(v))).collect(),
        _ => BTreeMap::new(),
    };
    let value_mappings = match obj.get("value_mappings") {
        Some(Value::Object(m)) => m.iter().filter_map(|(k, v)| Some((k.clone(), scalar_string(v)?))).collect(),
        _ => BTreeMap::new(),
    };
    let insight = ["insight", "insights", "learned"]
        .iter()
        .find_map(|k| obj.get(*k))
        .map(|v| string_list(v).join("\n"))
        .filter(|s| !s.trim().is_empty());
    Ok(ProbeDecision { action, probe_sql, relevant_columns, value_mappings, insight })
}

static FENCE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?s)```[A-Za-z0-9_-]*[ \t]*\r?\n?(.*?)```").unwrap());
static LINE_START_SQL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?im)^[ \t]*(SELECT|WITH)\b").unwrap());
static ANY_SELECT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\bSELECT\b").unwrap());

/// Extracts one SQL statement from a model answer.
pub fn parse_sql_answer(text: &str) -> Result<String, LlmError> {
    let body = match FENCE.captures(text) {
        Some(c) => c.get(1).unwrap().as_str(),
        None => text,
    };
    let start = LINE_START_SQL
        .captures(body)
        .map(|c| c.get(1).unwrap().start())
        .or_else(|| ANY_SELECT.find(body).map(|m| m.start()))
        .ok_or(LlmError::EmptyAnswer)?;
    let sql = first_statement(&body[start..]).trim().to_string();
    if sql.is_empty() {
        return Err(LlmError::EmptyAnswer);
    }
    Ok(sql)
}

/// Text up to the first `;` that is not inside a quoted string.
fn first_statement(sql: &str) -> &str {
    let mut quote: Option<char> = None;
    for (i, ch) in sql.char_indices() {
        match quote {
            Some(q) if ch == q => quote = None,
            Some(_) => {}
            None if matches!(ch, '\'' | '"' | '`') => quote = Some(ch),
            None if ch == ';' => return &sql[..i],
            None => {}
        }
    }
    sql
}

fn field_text(obj: &Map<String, Value>, key: &str) -> String {
    obj.get(key).and_then(scalar_string).unwrap_or_default()
}

pub fn parse_error_class(text: &str) -> Result<ErrorClass, LlmError> {
    let obj = first_json_object(text).ok_or_else(|| LlmError::Unparseable("no JSON verdict".into()))?;
    let label = field_text(&obj, "error_type");
    let kind = ErrorKind::parse_label(&label).ok_or_else(|| LlmError::Unparseable(format!("unknown error_type `{label}`")))?;
    Ok(ErrorClass { kind, reasoning: field_text(&obj, "reasoning"), specific_issue: field_text(&obj, "specific_issue") })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeEvaluation {
    pub probe_index: usize,
    pub relevant: bool,
    pub new_insight: bool,
    pub redundant: bool,
    #[serde(default)]
    pub reasoning: String,
}

fn flag(v: Option<&Value>) -> Option<bool> {
    match v? {
        Value::Bool(b) => Some(*b),
        Value::String(s) => match s.trim().to_ascii_lowercase().as_str() {
            "yes" | "true" => Some(true),
            "no" | "false" => Some(false),
            _ => None,
        },
        _ => None,
    }
}

pub fn parse_probe_evaluations(text: &str) -> Result<Vec<ProbeEvaluation>, LlmError> {
    let obj = first_json_object(text).ok_or_else(|| LlmError::Unparseable("no JSON evaluations".into()))?;
    let items = obj
        .get("evaluations")
        .and_then(Value::as_array)
        .ok_or_else(|| LlmError::Unparseable("missing evaluations array".into()))?;
    items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let bad = || LlmError::Unparseable(format!("evaluation {i} is malformed"));
            let o = item.as_object().ok_or_else(bad)?;
            Ok(ProbeEvaluation {
                probe_index: o.get("probe_index").and_then(Value::as_u64).map_or(i, |n| n as usize),
                relevant: flag(o.get("relevant")).ok_or_else(bad)?,
                new_insight: flag(o.get("new_insight")).ok_or_else(bad)?,
                redundant: flag(o.get("redundant")).ok_or_else(bad)?,
                reasoning: field_text(o, "reasoning"),
            })
        })
        .collect()
}

pub fn parse_llm_constraints(text: &str) -> Result<Vec<LlmConstraint>, LlmError> {
    let obj = first_json_object(text).ok_or_else(|| LlmError::Unparseable("no JSON constraints".into()))?;
    let items = obj.get("constraints").and_then(Value::as_array).cloned().unwrap_or_default();
    Ok(items
        .iter()
        .filter_map(Value::as_object)
        .map(|o| LlmConstraint {
            kind: field_text(o, "type"),
            description: field_text(o, "description"),
            sql_hint: field_text(o, "sql_hint"),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmIssue {
    pub severity: String,
    pub category: String,
    pub description: String,
    pub suggestion: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmVerdict {
    pub is_valid: bool,
    pub issues: Vec<LlmIssue>,
}

impl LlmVerdict {
    /// Issues that count as violations: errors, or anything when the
    /// verdict says the SQL is invalid.
    pub fn blocking_issues(&self) -> impl Iterator<Item = &LlmIssue> {
        let invalid = !self.is_valid;
        self.issues.iter().filter(move |i| invalid || i.severity.eq_ignore_ascii_case("error"))
    }
}

pub fn parse_llm_verification(text: &str) -> Result<LlmVerdict, LlmError> {
    let obj = first_json_object(text).ok_or_else(|| LlmError::Unparseable("no JSON verification".into()))?;
    let is_valid = flag(obj.get("is_valid")).ok_or_else(|| LlmError::Unparseable("missing is_valid".into()))?;
    let issues = obj
        .get("issues")
        .and_then(Value::as_array)
        .map(|a| {
            a.iter()
                .filter_map(Value::as_object)
                .map(|o| LlmIssue {
                    severity: field_text(o, "severity"),
                    category: field_text(o, "category"),
                    description: field_text(o, "description"),
                    suggestion: field_text(o, "suggestion"),
                })
                .collect()
        })
        .unwrap_or_default();
    Ok(LlmVerdict { is_valid, issues })
}
