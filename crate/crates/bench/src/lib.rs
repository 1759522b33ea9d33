//! Benchmark-only crate; see `benches/mlbm.rs`.
