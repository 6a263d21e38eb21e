//! Karhunen-Loeve expansion of solution snapshots and polynomial-chaos regression of
//! the mode coefficients.

pub mod gpc;
pub mod kl;
pub mod surrogate;

pub use gpc::{default_degree, gpc_basis_count, gpc_eval_basis, gpc_fit, GpcFit, ParameterMap, PolyFamily};
pub use kl::{collect_snapshots, kl_build, kl_coefficients, kl_reconstruct, KLBasis, SnapshotSet, SnapshotSolver};
pub use surrogate::{surrogate_predict, surrogate_predict_all, KLGpcSurrogate, Provenance};

use crate::domain::{ParameterSample, SolverConfig, TimeGrid};
use crate::error::Result;
use crate::models::ModelSpec;

/// Parameter maps onto `[-1, 1]` from the model's declared supports.
pub fn parameter_maps(model: &ModelSpec) -> Vec<ParameterMap> {
    model
        .supports()
        .into_iter()
        .map(|(lo, hi)| ParameterMap { lo, hi })
        .collect()
}

/// Snapshots, KL basis and gPC fit in one go. `degree = None` picks the default policy.
pub fn build_surrogate(
    model: &ModelSpec,
    grid: &TimeGrid,
    cfg: &SolverConfig,
    training: &[ParameterSample],
    eps_kl: f64,
    degree: Option<usize>,
    solver: SnapshotSolver,
) -> Result<KLGpcSurrogate> {
    let snap = collect_snapshots(model, grid, cfg, training, solver)?;
    let p = degree.unwrap_or_else(|| default_degree(training.len(), model.parameter_dim()));
    KLGpcSurrogate::fit(
        &snap,
        eps_kl,
        p,
        PolyFamily::Legendre,
        parameter_maps(model),
        Provenance {
            model: *model,
            grid: *grid,
            seed: cfg.seed,
            training_size: training.len(),
            eps_kl,
        },
    )
}
