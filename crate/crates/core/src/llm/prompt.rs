//! Prompt templates and the renderers that fill their placeholders.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::LlmError;
use crate::types::{Constraint, GroundingContext, ProbeRecord, ProbeResult, SchemaDescription, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Probe,
    Generate,
    Repair,
    ErrorJudge,
    ProbeJudge,
    LlmExtract,
    LlmVerify,
}

impl PromptKind {
    pub const ALL: [PromptKind; 7] = [
        Self::Probe,
        Self::Generate,
        Self::Repair,
        Self::ErrorJudge,
        Self::ProbeJudge,
        Self::LlmExtract,
        Self::LlmVerify,
    ];

    pub fn template(&self) -> &'static str {
        match self {
            Self::Probe => include_str!("prompts/probe.txt"),
            Self::Generate => include_str!("prompts/generate.txt"),
            Self::Repair => include_str!("prompts/repair.txt"),
            Self::ErrorJudge => include_str!("prompts/error_judge.txt"),
            Self::ProbeJudge => include_str!("prompts/probe_judge.txt"),
            Self::LlmExtract => include_str!("prompts/llm_extract.txt"),
            Self::LlmVerify => include_str!("prompts/llm_verify.txt"),
        }
    }

    /// Placeholder names the template requires, in order of appearance.
    pub fn placeholders(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        for seg in segments(self.template()) {
            if let Segment::Var(name) = seg {
                if !out.contains(&name) {
                    out.push(name);
                }
            }
        }
        out
    }

    /// `## ` section headings, verbatim.
    pub fn headings(&self) -> Vec<&'static str> {
        self.template().lines().filter(|l| l.starts_with("## ")).collect()
    }
}

/// Values for template placeholders.
pub type PromptVars = BTreeMap<&'static str, String>;

/// Fills every `{name}` in the template; `{{` and `}}` are literal braces.
pub fn render_prompt(kind: PromptKind, vars: &PromptVars) -> Result<String, LlmError> {
    let mut out = String::with_capacity(kind.template().len() + vars.values().map(String::len).sum::<usize>());
    for seg in segments(kind.template()) {
        match seg {
            Segment::Text(t) => out.push_str(t),
            Segment::Var(name) => {
                let v = vars.get(name).ok_or_else(|| LlmError::MissingPlaceholder(name.to_string()))?;
                out.push_str(v);
            }
        }
    }
    Ok(out)
}

enum Segment<'a> {
    Text(&'a str),
    Var(&'a str),
}

fn segments(template: &str) -> Vec<Segment<'_>> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(i) = rest.find(['{', '}']) {
        out.push(Segment::Text(&rest[..i]));
        let tail = &rest[i..];
        if tail.starts_with("{{") {
            out.push(Segment::Text("{"));
            rest = &tail[2..];
        } else if tail.starts_with("}}") {
            out.push(Segment::Text("}"));
            rest = &tail[2..];
        } else if tail.starts_with('{') {
            let end = tail.find('}').expect("unterminated placeholder in template");
            out.push(Segment::Var(&tail[1..end]));
            rest = &tail[end + 1..];
        } else {
            panic!("stray `}}` in template");
        }
    }
    out.push(Segment::Text(rest));
    out
}

pub const NONE_MARKER: &str = "(none)";

/// Longest cell text shown in a prompt.
pub const CELL_CHAR_LIMIT: usize = 200;

/// Rows per probe shown in a prompt.
pub const PROBE_ROWS_SHOWN: usize = 5;

fn or_none(s: String) -> String {
    if s.trim().is_empty() {
        NONE_MARKER.to_string()
    } else {
        s
    }
}

/// CREATE TABLE style rendering, foreign keys inline.
pub fn render_schema(schema: &SchemaDescription) -> String {
    let mut out = String::new();
    for t in &schema.tables {
        let _ = writeln!(out, "CREATE TABLE {} (", t.table_name);
        let mut lines: Vec<String> = t
            .columns
            .iter()
            .map(|c| {
                let mut l = format!("  {}", c.column_name);
                if !c.declared_type.is_empty() {
                    l.push(' ');
                    l.push_str(&c.declared_type);
                }
                if c.is_primary_key {
                    l.push_str(" PRIMARY KEY");
                }
                l
            })
            .collect();
        for fk in schema.foreign_keys.iter().filter(|fk| fk.from_table == t.table_name) {
            lines.push(format!("  FOREIGN KEY ({}) REFERENCES {}({})", fk.from_column, fk.to_table, fk.to_column));
        }
        out.push_str(&lines.join(",\n"));
        out.push_str("\n);\n");
    }
    or_none(out.trim_end().to_string())
}

fn truncate_cell(s: &str) -> String {
    if s.chars().count() <= CELL_CHAR_LIMIT {
        s.to_string()
    } else {
        let cut: String = s.chars().take(CELL_CHAR_LIMIT).collect();
        format!("{cut}...")
    }
}

fn render_probe(i: usize, p: &ProbeRecord, out: &mut String) {
    let _ = writeln!(out, "Probe {}: {}", i + 1, p.probe_sql);
    match &p.result {
        ProbeResult::Error(e) => {
            let _ = writeln!(out, "Error: {e}");
        }
        ProbeResult::Rows(r) => {
            let shown = r.rows.len().min(PROBE_ROWS_SHOWN);
            let more = if r.truncated { "+" } else { "" };
            let _ = writeln!(out, "Columns: {}", r.columns.join(", "));
            let _ = writeln!(out, "Result ({shown} of {}{more} rows):", r.rows.len());
            for row in r.rows.iter().take(PROBE_ROWS_SHOWN) {
                let cells: Vec<String> = row.iter().map(|c| truncate_cell(&c.render())).collect();
                let _ = writeln!(out, "  ({})", cells.join(", "));
            }
        }
    }
}

/// Probe history as (sql, first rows) pairs.
pub fn render_probe_history(probes: &[ProbeRecord]) -> String {
    let mut out = String::new();
    for (i, p) in probes.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        render_probe(i, p, &mut out);
    }
    or_none(out.trim_end().to_string())
}

/// Everything probing learned: history, value mappings, relevant columns
/// and insights.
pub fn render_grounding(g: &GroundingContext) -> String {
    if g.is_empty() {
        return NONE_MARKER.to_string();
    }
    let mut out = String::new();
    if !g.probes.is_empty() {
        out.push_str(&render_probe_history(&g.probes));
        out.push('\n');
    }
    if !g.merged_value_mappings.is_empty() {
        out.push_str("Value mappings:\n");
        for (k, v) in &g.merged_value_mappings {
            let _ = writeln!(out, "- \"{k}\" -> \"{v}\"");
        }
    }
    if !g.merged_relevant_columns.is_empty() {
        out.push_str("Relevant columns:\n");
        for (t, cols) in &g.merged_relevant_columns {
            let _ = writeln!(out, "- {t}: {}", cols.join(", "));
        }
    }
    if !g.insights.trim().is_empty() {
        out.push_str("Insights:\n");
        for line in g.insights.lines().filter(|l| !l.trim().is_empty()) {
            let _ = writeln!(out, "- {}", line.trim());
        }
    }
    or_none(out.trim_end().to_string())
}

pub fn render_constraints(constraints: &[Constraint]) -> String {
    let lines: Vec<String> =
        constraints.iter().map(|c| format!("- {c}: {} (from \"{}\")", c.describe(), c.trigger)).collect();
    or_none(lines.join("\n"))
}

/// One violation message per line.
pub fn render_violations(violations: &[Violation]) -> String {
    let lines: Vec<String> = violations.iter().map(|v| format!("- {}", v.message)).collect();
    or_none(lines.join("\n"))
}

fn text_or_none(s: &str) -> String {
    or_none(s.to_string())
}

/// Shared question/evidence/schema variables.
pub fn base_vars(question: &str, evidence: &str, schema: &SchemaDescription) -> PromptVars {
    let mut v = PromptVars::new();
    v.insert("question", question.to_string());
    v.insert("evidence", text_or_none(evidence));
    v.insert("schema", render_schema(schema));
    v
}
