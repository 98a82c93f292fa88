//! Criterion benchmarks for the solvers and estimators live under `benches/`;
//! run them with `cargo bench -p portopt-bench`.
