//! File formats, a simulated feature executor, cost measurement, synthetic
//! workloads and benchmarking around `featcascade-core`, plus the pieces the
//! `featcascade` command-line tool is built from.

pub mod app;
pub mod bench;
pub mod config;
pub mod dataset;
pub mod executor;
pub mod measure;
pub mod pipeline;
pub mod workload;
