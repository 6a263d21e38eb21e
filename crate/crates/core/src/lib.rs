//! Parallel-in-time solvers for parameter-dependent evolution problems.
//!
//! Classical parareal, a diagonalized (alpha-circulant) parallel coarse-grid
//! correction, and a Karhunen-Loeve / polynomial-chaos surrogate that supplies the
//! initial coarse trajectory. The `harness` module drives experiments on three
//! benchmark problems.

pub mod banded;
pub mod domain;
pub mod error;
pub mod harness;
pub mod klgpc;
pub mod models;
pub mod parareal;
pub mod pcgc;
pub mod propagators;
pub mod sampling;
pub mod theory;

pub use domain::{CoarseTrajectory, InitMode, ParameterSample, SolverConfig, StateVector, TimeGrid};
pub use error::{Result, SolverError};
pub use models::{ModelKind, ModelSpec};
