//! Criterion benchmarks for gas charging, list optimisation and audits.
