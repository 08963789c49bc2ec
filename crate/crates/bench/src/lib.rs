//! Criterion benchmarks for the deterministic parts of the pipeline; see
//! `benches/`. Run with `cargo bench -p pvsql-bench`.
