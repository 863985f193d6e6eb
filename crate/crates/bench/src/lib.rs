//! Criterion benchmarks for the hybrid-kf filters; see `benches/`.
