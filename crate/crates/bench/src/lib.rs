//! Criterion benchmarks for the graph, model and metric hot paths; see `benches/`.
