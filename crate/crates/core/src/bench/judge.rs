//! Optional model-judged analyses: error root causes for failed tasks and
//! per-probe quality ratings.

use std::path::Path;

use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::executor::{DatabaseHandle, ExecConfig};
use crate::llm::{
    base_vars, parse_error_class, parse_probe_evaluations, render_prompt, render_probe_history, ChatBackend,
    ChatRequest, PromptKind, PromptVars, NONE_MARKER,
};
use crate::types::{ErrorClass, ErrorKind, RunRecord, SchemaDescription, Task, ViolationSource};

fn percent(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

fn prompt_vars(task: &Task, db_root: &Path) -> PromptVars {
    let schema = DatabaseHandle::open_in(db_root, &task.db_id, ExecConfig::default())
        .and_then(|db| db.schema())
        .unwrap_or_else(|e| {
            warn!(db = %task.db_id, error = %e, "schema unavailable for judge prompt");
            SchemaDescription::default()
        });
    base_vars(&task.question, &task.evidence, &schema)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgedCase {
    pub task_id: String,
    pub class: Option<ErrorClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<String>,
}

/// Percentages are over classified cases; unclassified ones are counted
/// apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDistribution {
    pub n: usize,
    pub database_misinterpretation: f64,
    pub question_misinterpretation: f64,
    pub synthesis_failure: f64,
    pub unclassified: usize,
    pub cases: Vec<JudgedCase>,
}

/// Classifies each EX-failed record with the error judge prompt.
pub fn judge_errors(pairs: &[(&Task, &RunRecord)], db_root: &Path, backend: &dyn ChatBackend) -> ErrorDistribution {
    let mut cases = Vec::new();
    for (task, record) in pairs.iter().filter(|(_, r)| r.ex_correct == Some(false)) {
        let mut vars = prompt_vars(task, db_root);
        vars.insert("gold_sql", task.gold_sql.clone().unwrap_or_else(|| NONE_MARKER.into()));
        vars.insert("predicted_sql", if record.final_sql.is_empty() { NONE_MARKER.into() } else { record.final_sql.clone() });
        let exec_error = record
            .final_violations()
            .iter()
            .find(|v| matches!(v.source, ViolationSource::Syntax | ViolationSource::Execution))
            .map_or_else(|| NONE_MARKER.to_string(), |v| v.message.clone());
        vars.insert("exec_error", exec_error);
        let verdict = render_prompt(PromptKind::ErrorJudge, &vars)
            .and_then(|text| backend.complete(&ChatRequest::new(PromptKind::ErrorJudge, text)))
            .and_then(|resp| parse_error_class(&resp.text));
        let (class, problem) = match verdict {
            Ok(c) => (Some(c), None),
            Err(e) => (None, Some(e.to_string())),
        };
        cases.push(JudgedCase { task_id: task.task_id.clone(), class, problem });
    }
    let classified: Vec<ErrorKind> = cases.iter().filter_map(|c| c.class.as_ref().map(|c| c.kind)).collect();
    let share = |k: ErrorKind| percent(classified.iter().filter(|&&c| c == k).count(), classified.len());
    ErrorDistribution {
        n: cases.len(),
        database_misinterpretation: share(ErrorKind::DatabaseMisinterpretation),
        question_misinterpretation: share(ErrorKind::QuestionMisinterpretation),
        synthesis_failure: share(ErrorKind::SynthesisFailure),
        unclassified: cases.len() - classified.len(),
        cases,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeQualityReport {
    /// Probes that received a verdict.
    pub n_probes: usize,
    pub relevant: f64,
    pub new_insight: f64,
    pub redundant: f64,
    /// Records whose verdict could not be used.
    pub n_unparseable: usize,
}

/// Rates every probe of every record with the probe judge prompt (one call
/// per record that probed).
pub fn judge_probe_quality(pairs: &[(&Task, &RunRecord)], db_root: &Path, backend: &dyn ChatBackend) -> ProbeQualityReport {
    let (mut n, mut relevant, mut new_insight, mut redundant, mut bad) = (0, 0, 0, 0, 0);
    for (task, record) in pairs.iter().filter(|(_, r)| !r.grounding.probes.is_empty()) {
        let probes = &record.grounding.probes;
        let mut vars = prompt_vars(task, db_root);
        vars.insert("probes", render_probe_history(probes));
        let verdicts = render_prompt(PromptKind::ProbeJudge, &vars)
            .and_then(|text| backend.complete(&ChatRequest::new(PromptKind::ProbeJudge, text)))
            .and_then(|resp| parse_probe_evaluations(&resp.text));
        let evals = match verdicts {
            Ok(v) => v,
            Err(e) => {
                warn!(task = %task.task_id, error = %e, "probe verdict unusable");
                bad += 1;
                continue;
            }
        };
        // One verdict per probe; extra or duplicate indices are ignored.
        let mut seen = vec![false; probes.len()];
        for ev in evals {
            if ev.probe_index >= probes.len() || std::mem::replace(&mut seen[ev.probe_index], true) {
                continue;
            }
            n += 1;
            relevant += ev.relevant as usize;
            new_insight += ev.new_insight as usize;
            redundant += ev.redundant as usize;
        }
    }
    ProbeQualityReport {
        n_probes: n,
        relevant: percent(relevant, n),
        new_insight: percent(new_insight, n),
        redundant: percent(redundant, n),
        n_unparseable: bad,
    }
}
