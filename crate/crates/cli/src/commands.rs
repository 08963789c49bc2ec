//! Subcommand implementations.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use pvsql::agent::{run_probe_loop, run_task, Session, TaskContext};
use pvsql::bench::{
    eval_extraction_on_gold, eval_repair_rates, headroom_rerun, join_records, judge_errors, judge_probe_quality,
    load_tasks, run_benchmark, ComponentReport, PipelineConfig,
};
use pvsql::fixtures;
use pvsql::llm::{render_grounding, BackendKind, ChatBackend};
use pvsql::{check_all, extract_constraints, parse_sql, DatabaseHandle, RunRecord, Task, Violation};
use serde::Serialize;
use serde_json::json;
use tracing::warn;

use crate::config::{self, PipelineArgs};
use crate::{Cli, CliError, Command, TaskArgs, TasksFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum JudgeKind {
    Errors,
    Probes,
}

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Extract { question, evidence } => extract(cli, question, evidence),
        Command::Verify { sql, question, evidence } => verify(cli, sql, question, evidence),
        Command::Probe { task, pipeline } => probe(cli, task, pipeline),
        Command::Run { task, pipeline } => run(cli, task, pipeline),
        Command::Bench { tasks, pipeline, workers, out, trace } => {
            bench(cli, tasks, pipeline, *workers, out.as_deref(), trace.as_deref())
        }
        Command::EvalConstraints { tasks, db_root, trace } => {
            eval_constraints(cli, tasks, db_root.as_deref(), trace.as_deref())
        }
        Command::Headroom { tasks, trace, pipeline } => headroom(cli, tasks, trace, pipeline),
        Command::Judge { tasks, trace, what, pipeline } => judge(cli, tasks, trace, *what, pipeline),
        Command::InitFixture { dir } => init_fixture(cli, dir),
    }
}

fn emit<T: Serialize>(cli: &Cli, value: &T, human: impl FnOnce() -> String) {
    if cli.json {
        println!("{}", serde_json::to_string_pretty(value).expect("report types serialize"));
    } else {
        print!("{}", human());
    }
}

fn pipeline_config(cli: &Cli, args: &PipelineArgs) -> Result<PipelineConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => config::load(path)?,
        None => PipelineConfig::default(),
    };
    args.apply(&mut config);
    Ok(config)
}

fn db_root(config: &PipelineConfig) -> Result<&Path, CliError> {
    config.db_root.as_deref().ok_or_else(|| CliError::Usage("no database root: pass --db-root or set db_root".into()))
}

fn backend(config: &PipelineConfig) -> Result<Box<dyn ChatBackend>, CliError> {
    config.backend.build().map_err(|e| CliError::Usage(format!("backend: {e}")))
}

fn load_task(args: &TaskArgs) -> Result<Task, CliError> {
    let task = match (&args.task, &args.question, &args.db_id) {
        (Some(path), _, _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("task {}: {e}", path.display())))?
        }
        (None, Some(q), Some(db)) => Task::new("cli", db.clone(), q.clone()).with_evidence(args.evidence.clone()),
        _ => return Err(CliError::Usage("pass --task <file> or --question with --db-id".into())),
    };
    task.validate().map_err(CliError::Usage)?;
    Ok(task)
}

fn open_db(config: &PipelineConfig, db_id: &str) -> Result<DatabaseHandle, CliError> {
    DatabaseHandle::open_in(db_root(config)?, db_id, config.exec).map_err(|e| CliError::Usage(e.to_string()))
}

fn read_tasks(file: &TasksFile) -> Result<Vec<Task>, CliError> {
    load_tasks(&file.tasks, file.format).map_err(|e| CliError::Usage(format!("{}: {e}", file.tasks.display())))
}

fn read_trace(path: &Path) -> Result<Vec<RunRecord>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read trace {}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CliError::Usage(format!("{} line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Failure(format!("cannot write {}: {e}", path.display())))
}

fn extract(cli: &Cli, question: &str, evidence: &str) -> Result<(), CliError> {
    let constraints = extract_constraints(question, evidence);
    emit(cli, &constraints, || {
        if constraints.is_empty() {
            return "no constraints\n".into();
        }
        constraints.iter().fold(String::new(), |mut out, c| {
            let _ = writeln!(out, "{:<26} from \"{}\"", c.to_string(), c.trigger);
            out
        })
    });
    Ok(())
}

fn verify(cli: &Cli, sql: &str, question: &str, evidence: &str) -> Result<(), CliError> {
    let constraints = extract_constraints(question, evidence);
    let violations = match parse_sql(sql) {
        Ok(ast) => check_all(&ast, &constraints),
        Err(e) => vec![Violation::syntax(e.to_string())],
    };
    emit(cli, &violations, || {
        if violations.is_empty() {
            return format!("ok: {} constraint(s) satisfied\n", constraints.len());
        }
        violations.iter().map(|v| format!("- {}\n", v.message)).collect()
    });
    if violations.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failure(format!("{} violation(s)", violations.len())))
    }
}

fn probe(cli: &Cli, args: &TaskArgs, pipeline: &PipelineArgs) -> Result<(), CliError> {
    let config = pipeline_config(cli, pipeline)?;
    let task = load_task(args)?;
    let db = open_db(&config, &task.db_id)?;
    let backend = backend(&config)?;
    let schema = db.schema().map_err(|e| CliError::Failure(e.to_string()))?;
    let ctx = TaskContext { task: &task, schema: &schema, db: &db };
    let mut session = Session::new(&*backend, &config.agent);
    let (grounding, used) = run_probe_loop(ctx, &mut session, config.agent.effective_probes())
        .map_err(|e| CliError::Failure(e.to_string()))?;
    let value = json!({
        "task_id": task.task_id,
        "probe_count": used,
        "llm_calls": session.calls,
        "tokens_in": session.tokens_in,
        "tokens_out": session.tokens_out,
        "grounding": grounding,
    });
    emit(cli, &value, || format!("{used} probe(s)\n{}\n", render_grounding(&grounding)));
    Ok(())
}

fn run_summary(r: &RunRecord) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "task {}: {} probe(s), {} repair(s), {} call(s)", r.task_id, r.probe_count, r.repair_count, r.llm_calls);
    for (i, d) in r.drafts.iter().enumerate() {
        let _ = writeln!(out, "draft {i}: {}", d.sql);
        for v in &d.violations {
            let _ = writeln!(out, "  - {}", v.message);
        }
    }
    let _ = writeln!(out, "final: {}", r.final_sql);
    if let Some(e) = &r.error {
        let _ = writeln!(out, "error: {e}");
    }
    out
}

fn run(cli: &Cli, args: &TaskArgs, pipeline: &PipelineArgs) -> Result<(), CliError> {
    let config = pipeline_config(cli, pipeline)?;
    let task = load_task(args)?;
    let db = open_db(&config, &task.db_id)?;
    let backend = backend(&config)?;
    let record = run_task(&task, &db, &*backend, &config.agent);
    emit(cli, &record, || run_summary(&record));
    if record.failed {
        Err(CliError::Failure(record.error.unwrap_or_else(|| "task failed".into())))
    } else {
        Ok(())
    }
}

fn bench(
    cli: &Cli,
    file: &TasksFile,
    pipeline: &PipelineArgs,
    workers: Option<usize>,
    out: Option<&Path>,
    trace: Option<&Path>,
) -> Result<(), CliError> {
    let mut config = pipeline_config(cli, pipeline)?;
    if let Some(w) = workers {
        config.workers = w;
    }
    if config.backend.kind == BackendKind::Mock && config.workers != 1 {
        warn!("scripted replies are consumed in order; running with one worker");
        config.workers = 1;
    }
    db_root(&config)?;
    let tasks = read_tasks(file)?;
    let backend = backend(&config)?;
    let output = run_benchmark(&tasks, &config, &*backend).map_err(|e| CliError::Failure(e.to_string()))?;
    if let Some(path) = out {
        write_file(path, &serde_json::to_string_pretty(&output.report).expect("report serializes"))?;
    }
    if let Some(path) = trace {
        let mut lines = String::new();
        for r in &output.records {
            lines.push_str(&serde_json::to_string(r).expect("record serializes"));
            lines.push('\n');
        }
        write_file(path, &lines)?;
    }
    emit(cli, &output.report, || output.report.to_table());
    Ok(())
}

fn eval_constraints(cli: &Cli, file: &TasksFile, root: Option<&Path>, trace: Option<&Path>) -> Result<(), CliError> {
    let config = pipeline_config(cli, &PipelineArgs::default())?;
    let root = root.or(config.db_root.as_deref());
    let tasks = read_tasks(file)?;
    let gold = eval_extraction_on_gold(&tasks, root);
    let repair = trace.map(read_trace).transpose()?.map(|records| eval_repair_rates(&records));
    let components = repair.as_ref().map(|r| ComponentReport::new(&gold, r));
    let value = json!({ "gold_pass": gold, "repair": repair, "components": components });
    emit(cli, &value, || {
        let mut out = format!("gold SQL pass rate: {:.2}% ({}/{})\n", gold.pass_rate, gold.n_passed, gold.n);
        if let Some(r) = &repair {
            let _ = writeln!(out, "repair success rate: {:.2}% ({}/{})", r.success_rate, r.violations_resolved, r.violations_seen);
            let _ = writeln!(out, "repair regression rate: {:.2}% ({}/{})", r.regression_rate, r.regressions, r.satisfied_seen);
        }
        for f in &gold.failures {
            let _ = writeln!(out, "  {}: {}", f.task_id, f.messages.join("; "));
        }
        out
    });
    Ok(())
}

fn headroom(cli: &Cli, file: &TasksFile, trace: &Path, pipeline: &PipelineArgs) -> Result<(), CliError> {
    let config = pipeline_config(cli, pipeline)?;
    let root = db_root(&config)?;
    let tasks = read_tasks(file)?;
    let records = read_trace(trace)?;
    let backend = backend(&config)?;
    let pairs = join_records(&tasks, &records);
    let report = headroom_rerun(&pairs, root, &*backend, &config.agent, &config.exec);
    emit(cli, &report, || {
        format!(
            "headroom: {:.2}% of {} failed task(s) corrected with oracle constraints ({} skipped)\n",
            report.rate,
            report.n,
            report.skipped.len()
        )
    });
    Ok(())
}

fn judge(cli: &Cli, file: &TasksFile, trace: &Path, what: JudgeKind, pipeline: &PipelineArgs) -> Result<(), CliError> {
    let config = pipeline_config(cli, pipeline)?;
    let root = db_root(&config)?;
    let tasks = read_tasks(file)?;
    let records = read_trace(trace)?;
    let backend = backend(&config)?;
    let pairs = join_records(&tasks, &records);
    match what {
        JudgeKind::Errors => {
            let d = judge_errors(&pairs, root, &*backend);
            emit(cli, &d, || {
                format!(
                    "{} failure(s): database {:.1}%, question {:.1}%, synthesis {:.1}%, unclassified {}\n",
                    d.n, d.database_misinterpretation, d.question_misinterpretation, d.synthesis_failure, d.unclassified
                )
            });
        }
        JudgeKind::Probes => {
            let q = judge_probe_quality(&pairs, root, &*backend);
            emit(cli, &q, || {
                format!(
                    "{} probe(s): relevant {:.1}%, new insight {:.1}%, redundant {:.1}%\n",
                    q.n_probes, q.relevant, q.new_insight, q.redundant
                )
            });
        }
    }
    Ok(())
}

const FIXTURE_CONFIG: &str = "\
db_root = \".\"
max_probes = 5
max_repairs = 5

[backend]
kind = \"mock\"
script_path = \"case_study_script.json\"
";

fn init_fixture(cli: &Cli, dir: &Path) -> Result<(), CliError> {
    let fail = |e: &dyn std::fmt::Display| CliError::Failure(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(|e| fail(&e))?;
    let db = fixtures::create_case_study_db_root(dir).map_err(|e| fail(&e))?;
    let task = Task::new("case-study", fixtures::CASE_STUDY_DB_ID, fixtures::CASE_STUDY_QUESTION)
        .with_gold(fixtures::CASE_STUDY_REPAIRED_SQL);
    let bird = json!([{
        "question_id": task.task_id,
        "db_id": task.db_id,
        "question": task.question,
        "evidence": "",
        "SQL": fixtures::CASE_STUDY_REPAIRED_SQL,
        "difficulty": "challenging",
    }]);
    let files: Vec<(PathBuf, String)> = vec![
        (dir.join("task.json"), serde_json::to_string_pretty(&task).unwrap()),
        (dir.join("tasks.json"), serde_json::to_string_pretty(&bird).unwrap()),
        (dir.join("case_study_script.json"), serde_json::to_string_pretty(&fixtures::case_study_script()).unwrap()),
        (dir.join("config.toml"), FIXTURE_CONFIG.to_string()),
    ];
    for (path, contents) in &files {
        write_file(path, contents)?;
    }
    let written: Vec<PathBuf> = std::iter::once(db).chain(files.into_iter().map(|(p, _)| p)).collect();
    emit(cli, &written, || written.iter().map(|p| format!("wrote {}\n", p.display())).collect());
    Ok(())
}
