//! Criterion benchmarks for `rde-core`; see `benches/`.
