//! Criterion benchmarks for adjustkit live under `benches/`.
