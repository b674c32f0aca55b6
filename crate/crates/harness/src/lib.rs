//! Datasets, model assembly, training loops and property-check drivers built
//! on `gigp-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod data;
pub mod invariance;
pub mod model;
pub mod suites;
pub mod train;

pub use config::{ExperimentConfig, Pooling, Task};
pub use model::Model;
pub use train::{train, MetricsRecord, TrainOutcome};
