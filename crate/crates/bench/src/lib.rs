//! Criterion benchmarks for `confcal-core`; see `benches/kernels.rs`.
