//! Criterion benchmarks for steklov-core live in `benches/`.
