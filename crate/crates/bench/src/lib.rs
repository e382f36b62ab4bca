//! Criterion benchmarks for generation and the forecaster; see `benches/`.
