//! Criterion benchmarks for the core kernels.
