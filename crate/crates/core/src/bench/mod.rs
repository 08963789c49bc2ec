//! Benchmark harness: dataset loading, EX/VES metrics, component
//! evaluations, judge analyses and parallel runs.

mod components;
mod dataset;
mod judge;
mod metrics;
mod runner;

pub use components::{
    eval_extraction_on_gold, eval_repair_rates, headroom_rerun, join_records, ComponentReport, GoldFailure,
    GoldPassReport, HeadroomCase, HeadroomReport, RepairRates,
};
pub use dataset::{load_tasks, parse_tasks, DatasetError, DatasetFormat};
pub use judge::{judge_errors, judge_probe_quality, ErrorDistribution, JudgedCase, ProbeQualityReport};
pub use metrics::{
    execution_accuracy, gold_is_ordered, results_match, score_prediction, time_pair, valid_efficiency_score,
    weighted_token_cost, DifficultyStats, EvalError, MetricReport, Scored, TaskEvaluation, TimingLocks, VES_LABEL,
};
pub use runner::{run_benchmark, BenchError, BenchOutput, BenchReport, PipelineConfig};
