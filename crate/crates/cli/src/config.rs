//! Config file loading and flag overrides.

use std::path::{Path, PathBuf};

use clap::Args;
use pvsql::bench::PipelineConfig;
use pvsql::llm::BackendKind;
use pvsql::Mode;

use crate::CliError;

const BACKEND_KEYS: [&str; 6] = ["kind", "endpoint", "model", "script_path", "request_timeout_seconds", "extra"];

/// Reads a TOML config. Unknown keys are rejected; relative paths resolve
/// against the file's directory.
pub fn load(path: &Path) -> Result<PipelineConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut config = parse(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let resolve = |p: &mut PathBuf| {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    };
    if let Some(p) = config.db_root.as_mut() {
        resolve(p);
    }
    if let Some(p) = config.backend.script_path.as_mut() {
        resolve(p);
    }
    Ok(config)
}

pub fn parse(text: &str) -> Result<PipelineConfig, String> {
    let table: toml::Table = toml::from_str(text).map_err(|e| e.to_string())?;
    for (key, value) in &table {
        if !PipelineConfig::KEYS.contains(&key.as_str()) {
            return Err(format!("unknown key `{key}`"));
        }
        if key == "backend" {
            let inner = value.as_table().ok_or("`backend` must be a table")?;
            if let Some(k) = inner.keys().find(|k| !BACKEND_KEYS.contains(&k.as_str())) {
                return Err(format!("unknown key `backend.{k}`"));
            }
        }
    }
    toml::from_str(text).map_err(|e| e.to_string())
}

/// Flags that override config values.
#[derive(Debug, Clone, Default, Args)]
pub struct PipelineArgs {
    /// Directory holding `<db_id>/<db_id>.sqlite`.
    #[arg(long)]
    pub db_root: Option<PathBuf>,
    /// Probe budget (K).
    #[arg(long)]
    pub max_probes: Option<usize>,
    /// Repair budget (M).
    #[arg(long)]
    pub max_repairs: Option<usize>,
    /// rule | llm_verify | no_probe | no_repair
    #[arg(long)]
    pub mode: Option<Mode>,
    /// Statement timeout in seconds.
    #[arg(long)]
    pub timeout_seconds: Option<f64>,
    /// Replay backend replies from a JSON script instead of calling a model.
    #[arg(long)]
    pub mock_script: Option<PathBuf>,
}

impl PipelineArgs {
    pub fn apply(&self, config: &mut PipelineConfig) {
        if let Some(p) = &self.db_root {
            config.db_root = Some(p.clone());
        }
        if let Some(k) = self.max_probes {
            config.agent.max_probes = k;
        }
        if let Some(m) = self.max_repairs {
            config.agent.max_repairs = m;
        }
        if let Some(mode) = self.mode {
            config.agent.mode = mode;
        }
        if let Some(t) = self.timeout_seconds {
            config.exec.timeout_seconds = t;
        }
        if let Some(p) = &self.mock_script {
            config.backend.kind = BackendKind::Mock;
            config.backend.script_path = Some(p.clone());
        }
    }
}
