//! Experiment harness for the `stam` learner.
//!
//! A run builds seeded unlabeled streams, feeds them through a hierarchy
//! phase by phase and evaluates classification and clustering at every phase
//! boundary, optionally next to a PCA + KNN reference. Results are written as
//! CSV files and SVG plots by [`emit_report`].

pub mod config;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod report;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use experiment::{
    load_config, run_ablation, run_experiment, run_experiment_with, run_sweep, AblationKind,
    Dataset, ExperimentResult, StreamSnapshot, SweepAxis, SweepBlock,
};
pub use metrics::{BaselineMetrics, LtmTrace, PhaseMetrics};
pub use report::{emit_report, emit_sweep_report, summarize};
