//! Ensemble experiments on top of `monitored-core`: run configurations,
//! presets, parallel per-cell ensembles, resumable artifact directories, the
//! bond-dimension benchmark and the single-site lab export.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod chi_bench;
pub mod config;
pub mod ensemble;
pub mod lab;
pub mod presets;

pub use artifacts::{resume, run, RunReport};
pub use chi_bench::{chi_benchmark, ChiReport};
pub use config::{default_workers, Cell, RunConfig};
pub use presets::preset;
