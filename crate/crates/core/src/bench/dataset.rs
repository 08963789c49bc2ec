//! Benchmark task files.
//!
//! BIRD dev and Mini-Dev share a record shape (`question_id`, `db_id`,
//! `question`, `evidence`, `SQL`, `difficulty`); Spider uses `query` and has
//! neither evidence nor difficulty. Files may be a JSON array or JSON lines.

use std::path::Path;

use serde_json::{Map, Value};

use crate::types::{Difficulty, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    Bird,
    Spider,
    Minidev,
}

impl std::str::FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bird" => Ok(Self::Bird),
            "spider" => Ok(Self::Spider),
            "minidev" | "mini-dev" | "mini_dev" => Ok(Self::Minidev),
            other => Err(format!("unknown dataset format `{other}` (expected bird|spider|minidev)")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("not a JSON array or JSON lines file: {0}")]
    Json(String),
    /// A record is missing a field or has the wrong shape.
    #[error("record {index}: {message}")]
    Format { index: usize, message: String },
}

pub fn load_tasks(path: &Path, format: DatasetFormat) -> Result<Vec<Task>, DatasetError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| DatasetError::Io { path: path.display().to_string(), source })?;
    parse_tasks(&text, format)
}

pub fn parse_tasks(text: &str, format: DatasetFormat) -> Result<Vec<Task>, DatasetError> {
    records(text)?.iter().enumerate().map(|(i, v)| to_task(i, v, format)).collect()
}

fn records(text: &str) -> Result<Vec<Value>, DatasetError> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        return match serde_json::from_str(trimmed).map_err(|e| DatasetError::Json(e.to_string()))? {
            Value::Array(items) => Ok(items),
            _ => unreachable!("input starts with '['"),
        };
    }
    serde_json::Deserializer::from_str(trimmed)
        .into_iter::<Value>()
        .collect::<Result<_, _>>()
        .map_err(|e| DatasetError::Json(e.to_string()))
}

fn text_field(obj: &Map<String, Value>, keys: &[&str]) -> Option<String> {
    keys.iter().find_map(|k| match obj.get(*k)? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    })
}

fn to_task(index: usize, v: &Value, format: DatasetFormat) -> Result<Task, DatasetError> {
    let err = |message: String| DatasetError::Format { index, message };
    let obj = v.as_object().ok_or_else(|| err("expected a JSON object".into()))?;
    let required = |keys: &[&str]| {
        text_field(obj, keys)
            .filter(|s| !s.trim().is_empty())
            .ok_or_else(|| err(format!("missing `{}`", keys[0])))
    };
    let db_id = required(&["db_id"])?;
    let question = required(&["question"])?;
    let task = match format {
        DatasetFormat::Spider => Task {
            task_id: text_field(obj, &["question_id", "id"]).unwrap_or_else(|| index.to_string()),
            db_id,
            question,
            evidence: String::new(),
            gold_sql: Some(required(&["query", "SQL"])?),
            difficulty: Difficulty::Unknown,
        },
        DatasetFormat::Bird | DatasetFormat::Minidev => Task {
            task_id: text_field(obj, &["question_id", "id"]).unwrap_or_else(|| index.to_string()),
            db_id,
            question,
            evidence: text_field(obj, &["evidence"]).unwrap_or_default(),
            gold_sql: Some(required(&["SQL", "sql", "query"])?),
            difficulty: text_field(obj, &["difficulty"]).map(|d| Difficulty::parse_label(&d)).unwrap_or_default(),
        },
    };
    Ok(task)
}
