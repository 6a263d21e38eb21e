//! Experiment configuration, drivers and report writers.

pub mod config;
pub mod experiment;
pub mod report;

pub use config::{resolve, Distribution, ExperimentConfig, SolverKind, OUT_DIR_ENV};
pub use experiment::{
    report_contraction, report_energy, run_experiment, ContractionReport, EnergyReport, ErrorTable, ExperimentOutcome,
    SolverSeries,
};
