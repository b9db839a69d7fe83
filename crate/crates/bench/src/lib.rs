//! Criterion benchmarks for the logger pipeline; see `benches/`.
