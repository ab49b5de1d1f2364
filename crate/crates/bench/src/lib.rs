//! Criterion benchmarks for the core oracles and agents; see `benches/`.
