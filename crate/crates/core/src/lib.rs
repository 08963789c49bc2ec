//! Probe-and-verify text-to-SQL pipeline.
//!
//! The crate is organised bottom-up:
//!
//! - [`types`]: shared value types (tasks, constraints, violations, traces)
//! - [`extractor`]: rule-based constraint extraction from question text
//! - [`sqlcheck`]: SQL parsing and constraint verification against the AST
//! - [`executor`]: read-only SQLite execution, syntax checks, probes
//! - [`llm`]: prompt templates, response parsing, chat backends
//! - [`agent`]: the probe → generate → verify/repair loop
//! - [`bench`]: dataset loading, metrics and component evaluations

pub mod agent;
pub mod bench;
pub mod executor;
pub mod extractor;
pub mod fixtures;
pub mod llm;
pub mod sqlcheck;
pub mod types;

pub use extractor::{extract_constraints, RuleTable};
pub use executor::{DatabaseHandle, ExecConfig, ExecError};
pub use sqlcheck::{check_all, check_constraint, derive_constraints_from_sql, parse_sql, SqlAst};
pub use types::*;
