//! Benchmarks for lipconj-core live in benches/.
