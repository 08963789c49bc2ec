//! Read-only SQLite access: compile-only syntax checks, timed execution
//! with a statement timeout, bounded probe sampling and schema reading.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rusqlite::types::ValueRef;
use rusqlite::{Connection, ErrorCode, OpenFlags};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::debug;

use crate::types::{
    CellValue, ColumnInfo, ExecResult, ForeignKey, ProbeRecord, ProbeResult, SchemaDescription, TableInfo,
    Violation,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecError {
    #[error("database unavailable: {0}")]
    DbUnavailable(String),
    #[error("{0}")]
    Runtime(String),
    #[error("timeout after {0}s")]
    Timeout(f64),
    #[error("statement is not read-only")]
    NotReadOnly,
    #[error("not a SELECT statement")]
    NotASelect,
}

impl ExecError {
    /// Execution-stage violation for this error. `DbUnavailable` is an
    /// environment failure, not a property of the SQL, and yields `None`.
    pub fn to_violation(&self) -> Option<Violation> {
        match self {
            Self::DbUnavailable(_) => None,
            other => Some(Violation::execution(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct ExecConfig {
    pub timeout_seconds: f64,
    pub probe_row_cap: usize,
}

impl Default for ExecConfig {
    fn default() -> Self {
        Self { timeout_seconds: 30.0, probe_row_cap: 10 }
    }
}

/// One read-only connection to a task database (D).
///
/// A handle is confined to one worker; open another handle on the same
/// file for concurrent use.
pub struct DatabaseHandle {
    db_id: String,
    path: PathBuf,
    config: ExecConfig,
    conn: Connection,
    deadline: Arc<Mutex<Option<Instant>>>,
    executions: AtomicU64,
}

impl std::fmt::Debug for DatabaseHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DatabaseHandle")
            .field("db_id", &self.db_id)
            .field("path", &self.path)
            .field("config", &self.config)
            .finish()
    }
}

/// `<db_root>/<db_id>/<db_id>.sqlite`
pub fn database_path(db_root: &Path, db_id: &str) -> PathBuf {
    db_root.join(db_id).join(format!("{db_id}.sqlite"))
}

impl DatabaseHandle {
    pub fn open(db_id: &str, path: &Path, config: ExecConfig) -> Result<Self, ExecError> {
        if !(config.timeout_seconds > 0.0) || config.probe_row_cap == 0 {
            return Err(ExecError::DbUnavailable(format!(
                "invalid executor config: timeout {}s, probe row cap {}",
                config.timeout_seconds, config.probe_row_cap
            )));
        }
        if !path.is_file() {
            return Err(ExecError::DbUnavailable(format!("no database file at {}", path.display())));
        }
        let unavailable = |e: rusqlite::Error| ExecError::DbUnavailable(format!("{}: {e}", path.display()));
        let flags = OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX | OpenFlags::SQLITE_OPEN_URI;
        let conn = Connection::open_with_flags(path, flags).map_err(unavailable)?;
        // Opening is lazy; touching the schema catches non-database files.
        conn.query_row("SELECT count(*) FROM sqlite_master", [], |r| r.get::<_, i64>(0)).map_err(unavailable)?;

        let deadline: Arc<Mutex<Option<Instant>>> = Arc::default();
        let watch = Arc::clone(&deadline);
        conn.progress_handler(
            1000,
            Some(move || watch.lock().map(|d| d.is_some_and(|t| Instant::now() >= t)).unwrap_or(false)),
        )
        .map_err(unavailable)?;
        Ok(Self { db_id: db_id.to_string(), path: path.to_path_buf(), config, conn, deadline, executions: AtomicU64::new(0) })
    }

    pub fn open_in(db_root: &Path, db_id: &str, config: ExecConfig) -> Result<Self, ExecError> {
        Self::open(db_id, &database_path(db_root, db_id), config)
    }

    /// A fresh handle on the same file and configuration.
    pub fn reopen(&self) -> Result<Self, ExecError> {
        Self::open(&self.db_id, &self.path, self.config.clone())
    }

    pub fn db_id(&self) -> &str {
        &self.db_id
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn read_only(&self) -> bool {
        true
    }

    pub fn config(&self) -> &ExecConfig {
        &self.config
    }

    /// Statements that reached the engine (syntax checks excluded).
    pub fn executions(&self) -> u64 {
        self.executions.load(Ordering::Relaxed)
    }

    pub fn schema(&self) -> Result<SchemaDescription, ExecError> {
        let err = |e: rusqlite::Error| ExecError::DbUnavailable(e.to_string());
        let mut stmt = self
            .conn
            .prepare("SELECT name FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite_%' ORDER BY rowid")
            .map_err(err)?;
        let names: Vec<String> = stmt.query_map([], |r| r.get(0)).map_err(err)?.collect::<Result<_, _>>().map_err(err)?;

        let mut tables = Vec::new();
        let mut raw_fks = Vec::new();
        for name in names {
            let mut cols = self.conn.prepare("SELECT name, type, pk FROM pragma_table_info(?1) ORDER BY cid").map_err(err)?;
            let columns: Vec<ColumnInfo> = cols
                .query_map([&name], |r| {
                    Ok(ColumnInfo { column_name: r.get(0)?, declared_type: r.get(1)?, is_primary_key: r.get::<_, i64>(2)? > 0 })
                })
                .map_err(err)?
                .collect::<Result<_, _>>()
                .map_err(err)?;
            let mut fks = self.conn.prepare("SELECT \"table\", \"from\", \"to\" FROM pragma_foreign_key_list(?1)").map_err(err)?;
            let rows = fks
                .query_map([&name], |r| Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?, r.get::<_, Option<String>>(2)?)))
                .map_err(err)?;
            for row in rows {
                let (to_table, from_column, to_column) = row.map_err(err)?;
                raw_fks.push((name.clone(), from_column, to_table, to_column));
            }
            tables.push(TableInfo { table_name: name, columns });
        }

        let mut schema = SchemaDescription { tables, foreign_keys: Vec::new() };
        for (from_table, from_column, to_table, to_column) in raw_fks {
            // A missing target column means "the primary key of to_table".
            let to_column = to_column.or_else(|| {
                schema.table(&to_table)?.columns.iter().find(|c| c.is_primary_key).map(|c| c.column_name.clone())
            });
            let Some(to_column) = to_column else { continue };
            let has = |t: &str, c: &str| {
                schema.table(t).is_some_and(|t| t.columns.iter().any(|col| col.column_name.eq_ignore_ascii_case(c)))
            };
            // dangling keys exist in real benchmark files; keep only valid ones
            if has(&from_table, &from_column) && has(&to_table, &to_column) {
                let fk = ForeignKey { from_table, from_column, to_table, to_column };
                schema.foreign_keys.push(fk);
            }
        }
        Ok(schema)
    }

    /// Compiles `EXPLAIN <sql>` against the live schema without stepping it.
    pub fn syntax_check(&self, sql: &str) -> Option<Violation> {
        if sql.trim().trim_end_matches(';').trim().is_empty() {
            return Some(Violation::syntax("empty SQL"));
        }
        match self.conn.prepare(&format!("EXPLAIN {sql}")) {
            Ok(_) => None,
            Err(e) => Some(Violation::syntax(engine_message(&e))),
        }
    }

    /// Runs a read-only SELECT/WITH statement. `row_cap` bounds the rows
    /// fetched; `truncated` reports whether more rows were available.
    pub fn execute(&self, sql: &str, row_cap: Option<usize>) -> Result<ExecResult, ExecError> {
        if !matches!(leading_keyword(sql).as_deref(), Some("SELECT" | "WITH")) {
            return Err(ExecError::NotASelect);
        }
        let mut stmt = self.conn.prepare(sql).map_err(|e| ExecError::Runtime(engine_message(&e)))?;
        if !stmt.readonly() {
            return Err(ExecError::NotReadOnly);
        }
        self.executions.fetch_add(1, Ordering::Relaxed);
        let columns: Vec<String> = stmt.column_names().into_iter().map(String::from).collect();
        let width = columns.len();

        let start = Instant::now();
        *self.deadline.lock().unwrap() = Some(start + Duration::from_secs_f64(self.config.timeout_seconds));
        let outcome = (|| {
            let mut rows = stmt.query([])?;
            let mut out = Vec::new();
            let mut truncated = false;
            while let Some(row) = rows.next()? {
                if row_cap.is_some_and(|cap| out.len() >= cap) {
                    truncated = true;
                    break;
                }
                let mut cells = Vec::with_capacity(width);
                for i in 0..width {
                    cells.push(cell(row.get_ref(i)?));
                }
                out.push(cells);
            }
            Ok::<_, rusqlite::Error>((out, truncated))
        })();
        *self.deadline.lock().unwrap() = None;
        let elapsed_seconds = start.elapsed().as_secs_f64();

        match outcome {
            Ok((rows, truncated)) => {
                debug!(db = %self.db_id, rows = rows.len(), elapsed_seconds, "executed");
                Ok(ExecResult { columns, rows, truncated, elapsed_seconds })
            }
            Err(e) if e.sqlite_error_code() == Some(ErrorCode::OperationInterrupted) => {
                Err(ExecError::Timeout(self.config.timeout_seconds))
            }
            Err(e) => Err(ExecError::Runtime(engine_message(&e))),
        }
    }

    /// Runs a probe capped at the configured row limit. Engine errors are
    /// kept in the record so the probing loop can carry on.
    pub fn execute_probe(&self, probe_sql: &str) -> Result<ProbeRecord, ExecError> {
        if leading_keyword(probe_sql).as_deref() != Some("SELECT") {
            return Err(ExecError::NotASelect);
        }
        let result = match self.execute(probe_sql, Some(self.config.probe_row_cap)) {
            Ok(r) => ProbeResult::Rows(r),
            Err(ExecError::DbUnavailable(m)) => return Err(ExecError::DbUnavailable(m)),
            Err(e) => ProbeResult::Error(e.to_string()),
        };
        Ok(ProbeRecord {
            probe_sql: probe_sql.to_string(),
            result,
            relevant_columns: Default::default(),
            value_mappings: Default::default(),
        })
    }
}

fn engine_message(e: &rusqlite::Error) -> String {
    match e {
        rusqlite::Error::SqliteFailure(_, Some(msg)) => msg.clone(),
        other => other.to_string(),
    }
}

fn cell(v: ValueRef<'_>) -> CellValue {
    match v {
        ValueRef::Null => CellValue::Null,
        ValueRef::Integer(i) => CellValue::Int(i),
        ValueRef::Real(r) => CellValue::Real(r),
        ValueRef::Text(t) => CellValue::Text(String::from_utf8_lossy(t).into_owned()),
        ValueRef::Blob(b) => {
            let mut blob_hex = String::with_capacity(b.len() * 2);
            for byte in b {
                let _ = write!(blob_hex, "{byte:02x}");
            }
            CellValue::Blob { blob_hex }
        }
    }
}

/// First keyword after whitespace and comments, upper-cased.
pub fn leading_keyword(sql: &str) -> Option<String> {
    let mut rest = sql;
    loop {
        rest = rest.trim_start();
        if let Some(r) = rest.strip_prefix("--") {
            rest = r.split_once('\n').map_or("", |(_, tail)| tail);
        } else if let Some(r) = rest.strip_prefix("/*") {
            rest = r.split_once("*/").map_or("", |(_, tail)| tail);
        } else {
            break;
        }
    }
    let word: String = rest.chars().take_while(|c| c.is_ascii_alphabetic()).collect();
    (!word.is_empty()).then(|| word.to_ascii_uppercase())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn fixture() -> (tempfile::TempDir, DatabaseHandle) {
        let dir = tempfile::tempdir().unwrap();
        fixtures::create_case_study_db_root(dir.path()).unwrap();
        let db = DatabaseHandle::open_in(dir.path(), fixtures::CASE_STUDY_DB_ID, ExecConfig::default()).unwrap();
        (dir, db)
    }

    #[test]
    fn leading_keyword_skips_comments() {
        assert_eq!(leading_keyword("  -- hi\n /* x */ select 1").as_deref(), Some("SELECT"));
        assert_eq!(leading_keyword("with x as (select 1) select * from x").as_deref(), Some("WITH"));
        assert_eq!(leading_keyword("-- only a comment"), None);
    }

    #[test]
    fn syntax_check_examples() {
        let (_d, db) = fixture();
        assert!(db.syntax_check("SELECT 1").is_none());
        assert!(db.syntax_check("SELEC 1").is_some());
        let v = db.syntax_check("SELECT no_such_col FROM customers").unwrap();
        assert!(v.message.contains("no_such_col"), "{}", v.message);
        assert_eq!(db.executions(), 0);
    }

    #[test]
    fn execute_examples() {
        let (_d, db) = fixture();
        let r = db.execute("SELECT 1", None).unwrap();
        assert_eq!(r.rows, vec![vec![CellValue::Int(1)]]);
        assert_eq!(db.execute("SELECT 1/0", None).unwrap().rows, vec![vec![CellValue::Null]]);
        let r = db.execute(fixtures::CASE_STUDY_PROBE_1, None).unwrap();
        let states: Vec<String> = r.rows.iter().map(|row| row[0].render()).collect();
        assert_eq!(&states[..3], ["CA", "NY", "TX"]);
        assert_eq!(db.executions(), 3);
    }

    #[test]
    fn writes_are_rejected() {
        let (_d, db) = fixture();
        assert_eq!(db.execute("DELETE FROM customers", None), Err(ExecError::NotASelect));
        // a WITH prefix does not smuggle a write through
        let e = db.execute("WITH x AS (SELECT 1) DELETE FROM customers", None).unwrap_err();
        assert!(matches!(e, ExecError::NotReadOnly | ExecError::Runtime(_)), "{e:?}");
        assert_eq!(db.execute("SELECT count(*) FROM customers", None).unwrap().rows[0][0], CellValue::Int(8));
    }

    #[test]
    fn runtime_error_becomes_execution_violation() {
        let (_d, db) = fixture();
        let e = db.execute("SELECT * FROM nowhere", None).unwrap_err();
        let v = e.to_violation().unwrap();
        assert_eq!(v.source, crate::types::ViolationSource::Execution);
        assert!(v.message.contains("nowhere"));
    }

    #[test]
    fn timeout_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        fixtures::create_case_study_db_root(dir.path()).unwrap();
        let cfg = ExecConfig { timeout_seconds: 0.2, probe_row_cap: 10 };
        let db = DatabaseHandle::open_in(dir.path(), fixtures::CASE_STUDY_DB_ID, cfg).unwrap();
        let start = Instant::now();
        let e = db.execute(fixtures::SLOW_SQL, None).unwrap_err();
        assert_eq!(e, ExecError::Timeout(0.2));
        assert_eq!(e.to_string(), "timeout after 0.2s");
        assert!(start.elapsed() < Duration::from_secs_f64(1.2));
        // the handle stays usable
        assert!(db.execute("SELECT 1", None).is_ok());
    }

    #[test]
    fn probes_are_capped() {
        let (_d, db) = fixture();
        let rec = db.execute_probe("SELECT * FROM orders").unwrap();
        let ProbeResult::Rows(r) = rec.result else { panic!() };
        assert_eq!(r.rows.len(), 10);
        assert!(r.truncated);

        let rec = db.execute_probe(fixtures::CASE_STUDY_PROBE_2).unwrap();
        let ProbeResult::Rows(r) = rec.result else { panic!() };
        assert_eq!(r.rows[0], vec![CellValue::Text("2023-01-15".into()), CellValue::Text("2023-01-10".into())]);
        assert!(!r.truncated);
    }

    #[test]
    fn failing_probe_keeps_error_text() {
        let (_d, db) = fixture();
        let rec = db.execute_probe("SELECT bogus FROM orders").unwrap();
        assert!(matches!(&rec.result, ProbeResult::Error(m) if m.contains("bogus")));
        assert_eq!(db.execute_probe("PRAGMA table_info(orders)").unwrap_err(), ExecError::NotASelect);
    }

    #[test]
    fn schema_reads_tables_and_keys() {
        let (_d, db) = fixture();
        let s = db.schema().unwrap();
        let names: Vec<_> = s.tables.iter().map(|t| t.table_name.as_str()).collect();
        assert_eq!(names, ["customers", "products", "orders"]);
        let orders = s.table("orders").unwrap();
        assert_eq!(orders.columns[3].declared_type, "DATE");
        assert!(orders.columns[0].is_primary_key);
        assert_eq!(s.foreign_keys.len(), 2);
        assert!(s.foreign_keys.iter().all(|fk| fk.from_table == "orders" && fk.to_column == "id"));
    }

    #[test]
    fn missing_or_corrupt_files() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(DatabaseHandle::open_in(dir.path(), "nope", ExecConfig::default()), Err(ExecError::DbUnavailable(_))));
        let bad = dir.path().join("bad.sqlite");
        std::fs::write(&bad, b"definitely not sqlite, just some bytes padded out to look like a file").unwrap();
        assert!(matches!(DatabaseHandle::open("bad", &bad, ExecConfig::default()), Err(ExecError::DbUnavailable(_))));
    }
}
