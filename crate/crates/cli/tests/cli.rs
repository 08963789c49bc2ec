use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn pvsql(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pvsql")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn fixture_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let o = pvsql(&["init-fixture", "--dir", p(&dir.path().join("fx"))]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    dir
}

fn write(path: PathBuf, v: &Value) -> PathBuf {
    std::fs::write(&path, serde_json::to_string(v).unwrap()).unwrap();
    path
}

#[test]
fn extract_how_many_gives_count() {
    let o = pvsql(&["extract", "--question", "how many students", "--json"]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v, json!([{"kind": "Count", "param": null, "trigger": "how many"}]));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&pvsql(&["frobnicate"])), 2);
    assert_eq!(code(&pvsql(&["extract"])), 2);
    assert_eq!(code(&pvsql(&["bench", "--tasks", "x.json", "--format", "sqlite"])), 2);
    let o = pvsql(&["run", "--question", "How many?", "--db-id", "retail"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no database root"));
    assert_eq!(code(&pvsql(&["eval-constraints", "--tasks", "/no/such/file.json"])), 2);
}

#[test]
fn verify_exit_code_follows_violations() {
    let bad = pvsql(&["verify", "--sql", "SELECT name FROM t", "--question", "List the top 3 names.", "--json"]);
    assert_eq!(code(&bad), 1);
    assert_eq!(stdout_json(&bad)[0]["message"], "\"top 3\" requires ORDER BY ... LIMIT 3");
    let good = pvsql(&["verify", "--sql", "SELECT name FROM t ORDER BY x DESC LIMIT 3", "--question", "List the top 3 names."]);
    assert_eq!(code(&good), 0);
    let garbage = pvsql(&["verify", "--sql", "SELEC name", "--question", "List names.", "--json"]);
    assert_eq!(code(&garbage), 1);
    assert_eq!(stdout_json(&garbage)[0]["source"], "syntax");
}

#[test]
fn run_replays_the_case_study() {
    let dir = fixture_dir();
    let fx = dir.path().join("fx");
    let o = pvsql(&["run", "--json", "--config", p(&fx.join("config.toml")), "--task", p(&fx.join("task.json"))]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = stdout_json(&o);
    assert_eq!((r["probe_count"].as_u64(), r["repair_count"].as_u64()), (Some(2), Some(1)));
    assert_eq!(r["drafts"][1]["violations"], json!([]));
}

#[test]
fn flags_override_the_config_file() {
    let dir = fixture_dir();
    let fx = dir.path().join("fx");
    let script = write(
        dir.path().join("gen_only.json"),
        &json!([{"expect_kind": "generate", "response_text": "SELECT COUNT(*) FROM customers"}]),
    );
    // config says K=5 and the case-study script; the flags make this a
    // probe-free run against a one-reply script
    let o = pvsql(&[
        "run", "--json", "--config", p(&fx.join("config.toml")), "--max-probes", "0", "--mock-script", p(&script),
        "--question", "How many customers are there?", "--db-id", "retail",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout_json(&o)["llm_calls"], 1);
}

#[test]
fn failed_runs_exit_one() {
    let dir = fixture_dir();
    let script = write(
        dir.path().join("prose.json"),
        &json!([
            {"expect_kind": "generate", "response_text": "Sorry, I cannot help."},
            {"expect_kind": "generate", "response_text": "Still no."}
        ]),
    );
    let o = pvsql(&[
        "run", "--db-root", p(&dir.path().join("fx")), "--max-probes", "0", "--mock-script", p(&script),
        "--question", "How many customers are there?", "--db-id", "retail",
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn bad_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "max_probs = 2\n").unwrap();
    let o = pvsql(&["extract", "--question", "x", "--config", p(&cfg)]);
    // extract ignores the pipeline config entirely
    assert_eq!(code(&o), 0);
    let o = pvsql(&["run", "--config", p(&cfg), "--question", "How many?", "--db-id", "retail"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown key `max_probs`"));
}

#[test]
fn bench_on_three_task_fixture() {
    let dir = fixture_dir();
    let root = dir.path().join("fx");
    let tasks = write(
        dir.path().join("tasks.json"),
        &json!([
            {"question_id": "c1", "db_id": "retail", "question": "How many customers are there?", "SQL": "SELECT COUNT(*) FROM customers", "difficulty": "simple"},
            {"question_id": "c2", "db_id": "retail", "question": "List the distinct states of the customers.", "SQL": "SELECT DISTINCT state FROM customers", "difficulty": "moderate"},
            {"question_id": "c3", "db_id": "retail", "question": "Tell me the size of the product catalogue.", "SQL": "SELECT COUNT(*) FROM products", "difficulty": "simple"}
        ]),
    );
    let script = write(
        dir.path().join("script.json"),
        &json!([
            {"expect_kind": "generate", "response_text": "SELECT COUNT(*) FROM customers", "tokens_in": 400, "tokens_out": 20},
            {"expect_kind": "generate", "response_text": "SELECT state FROM customers", "tokens_in": 420, "tokens_out": 22},
            {"expect_kind": "repair", "response_text": "SELECT DISTINCT state FROM customers", "tokens_in": 500, "tokens_out": 24},
            {"expect_kind": "generate", "response_text": "SELECT id FROM products", "tokens_in": 380, "tokens_out": 18}
        ]),
    );
    let (report, trace) = (dir.path().join("report.json"), dir.path().join("records.jsonl"));
    let o = pvsql(&[
        "bench", "--tasks", p(&tasks), "--format", "bird", "--db-root", p(&root), "--mock-script", p(&script),
        "--max-probes", "0", "--out", p(&report), "--trace", p(&trace), "--workers", "3",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("VES (sqrt time-ratio)"), "{stdout}");

    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["metrics"]["n_tasks"], 3);
    assert!((r["metrics"]["ex"].as_f64().unwrap() - 200.0 / 3.0).abs() < 1e-9);
    assert_eq!(r["ves_definition"], "VES (sqrt time-ratio)");
    let lines: Vec<Value> =
        std::fs::read_to_string(&trace).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[2]["ex_correct"], false);

    // the trace feeds the component evaluations
    let o = pvsql(&["eval-constraints", "--json", "--tasks", p(&tasks), "--db-root", p(&root), "--trace", p(&trace)]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["gold_pass"]["pass_rate"], 100.0);
    assert_eq!(v["components"]["repair_success_rate"], 100.0);

    // the question has no trigger, but gold-derived constraints flag the
    // missing COUNT, so one repair fixes it
    let fix = write(
        dir.path().join("fix.json"),
        &json!([{"expect_kind": "repair", "response_text": "SELECT COUNT(*) FROM products"}]),
    );
    let o = pvsql(&[
        "headroom", "--json", "--tasks", p(&tasks), "--trace", p(&trace), "--db-root", p(&root), "--mock-script", p(&fix),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let h = stdout_json(&o);
    assert_eq!((h["n"].as_u64(), h["rate"].as_f64()), (Some(1), Some(100.0)));
}

#[test]
fn eval_constraints_on_gold_corpus() {
    let corpus = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/gold_corpus.json");
    let o = pvsql(&["eval-constraints", "--tasks", p(&corpus)]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("gold SQL pass rate: 100.00% (50/50)"));
}

#[test]
fn probe_subcommand_reports_grounding() {
    let dir = fixture_dir();
    let fx = dir.path().join("fx");
    let o = pvsql(&["probe", "--json", "--config", p(&fx.join("config.toml")), "--task", p(&fx.join("task.json"))]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert_eq!(v["probe_count"], 2);
    assert_eq!(v["grounding"]["merged_value_mappings"]["California"], "CA");
}
