//! Benchmarks for the record pipeline and the network live in `benches/`.
