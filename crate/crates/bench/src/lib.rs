//! Criterion benchmarks for blockspec live in `benches/`.
