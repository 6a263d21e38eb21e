//! Snapshot library and Karhunen-Loeve basis by the method of snapshots.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::domain::{CoarseTrajectory, InitMode, ParameterSample, SolverConfig, TimeGrid};
use crate::error::{Result, SolverError};
use crate::models::ModelSpec;
use crate::parareal::{IterationTrace, SolveOptions};
use crate::pcgc::pcgc_solve;
use crate::propagators::Propagators;

/// How snapshot trajectories are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SnapshotSolver {
    /// Diagonalized parareal from a coarse sweep, stopped on the increment.
    #[default]
    Pcgc,
    /// Plain serial fine propagation.
    SerialFine,
}

/// Space-time solution fields over a training set, split into mean and fluctuations.
#[derive(Debug, Clone)]
pub struct SnapshotSet {
    pub samples: Vec<ParameterSample>,
    /// Flattened `U_1..U_N` per sample.
    pub fields: Vec<DVector<f64>>,
    pub mean_field: DVector<f64>,
    pub fluctuations: Vec<DVector<f64>>,
    /// Cell weight `h^d deltaT` of the discrete space-time inner product.
    pub weight: f64,
}

impl SnapshotSet {
    pub fn new(samples: Vec<ParameterSample>, fields: Vec<DVector<f64>>, weight: f64) -> Result<Self> {
        if fields.is_empty() {
            return Err(SolverError::InvalidArgument("snapshot set is empty".into()));
        }
        if samples.len() != fields.len() {
            return Err(SolverError::DimensionMismatch {
                expected: samples.len(),
                got: fields.len(),
            });
        }
        let len = fields[0].len();
        if let Some(bad) = fields.iter().find(|f| f.len() != len) {
            return Err(SolverError::DimensionMismatch {
                expected: len,
                got: bad.len(),
            });
        }
        if !(weight > 0.0) {
            return Err(SolverError::InvalidArgument(format!("inner-product weight must be positive, got {weight}")));
        }
        let mut mean = DVector::zeros(len);
        for f in &fields {
            mean += f;
        }
        mean /= fields.len() as f64;
        let fluctuations = fields.iter().map(|f| f - &mean).collect();
        Ok(Self {
            samples,
            fields,
            mean_field: mean,
            fluctuations,
            weight,
        })
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        self.weight * a.dot(b)
    }
}

/// Space-time cell weight `h^d deltaT` for a model and grid.
pub fn cell_weight(model: &ModelSpec, grid: &TimeGrid) -> f64 {
    model.spacing().powi(model.spatial_dim() as i32) * grid.coarse_step
}

fn snapshot(model: &ModelSpec, grid: &TimeGrid, cfg: &SolverConfig, xi: &ParameterSample, solver: SnapshotSolver) -> Result<CoarseTrajectory> {
    model.check_sample(xi)?;
    let props = Propagators::new(model, xi, grid, cfg)?;
    let u0 = model.initial_condition(xi);
    match solver {
        SnapshotSolver::SerialFine => props.fine_reference(&u0),
        SnapshotSolver::Pcgc => {
            debug_assert_eq!(cfg.init_mode, InitMode::CoarseSweep);
            let init = props.coarse_sweep(&u0)?;
            let trace: IterationTrace = pcgc_solve(model, xi, grid, cfg, &init, SolveOptions::default())?;
            Ok(trace.final_trajectory)
        }
    }
}

/// Solve every training sample, concurrently, and split mean and fluctuations.
pub fn collect_snapshots(
    model: &ModelSpec,
    grid: &TimeGrid,
    cfg: &SolverConfig,
    training: &[ParameterSample],
    solver: SnapshotSolver,
) -> Result<SnapshotSet> {
    if training.is_empty() {
        return Err(SolverError::InvalidArgument("training set is empty".into()));
    }
    let cfg = SolverConfig {
        init_mode: InitMode::CoarseSweep,
        ..cfg.clone()
    };
    let fields = training
        .par_iter()
        .map(|xi| {
            snapshot(model, grid, &cfg, xi, solver)
                .map(|t| t.flatten())
                .map_err(|e| SolverError::Sample {
                    id: xi.id,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    SnapshotSet::new(training.to_vec(), fields, cell_weight(model, grid))
}

/// Retained Karhunen-Loeve modes of a snapshot set.
#[derive(Debug, Clone)]
pub struct KLBasis {
    /// All covariance eigenvalues, descending, negatives clamped to zero.
    pub eigenvalues: Vec<f64>,
    /// `g_1..g_{M_Q}`, orthonormal under the weighted inner product.
    pub modes: Vec<DVector<f64>>,
    pub weight: f64,
}

impl KLBasis {
    /// `M_Q`.
    pub fn retained(&self) -> usize {
        self.modes.len()
    }

    pub fn retained_eigenvalues(&self) -> &[f64] {
        &self.eigenvalues[..self.retained()]
    }

    /// `sum_{i > M_Q} lambda_i / sum_i lambda_i`, zero for a zero-variance set.
    pub fn discarded_energy_ratio(&self) -> f64 {
        let total: f64 = self.eigenvalues.iter().sum();
        if total <= 0.0 {
            return 0.0;
        }
        self.eigenvalues[self.retained()..].iter().sum::<f64>() / total
    }

    pub fn inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        self.weight * a.dot(b)
    }

    /// Gram matrix of the retained modes.
    pub fn gram(&self) -> DMatrix<f64> {
        let m = self.retained();
        DMatrix::from_fn(m, m, |i, j| self.inner(&self.modes[i], &self.modes[j]))
    }
}

/// Eigenvalues below this fraction of the largest are never retained.
pub const EIGEN_FLOOR: f64 = 1e-14;

pub fn kl_build(snap: &SnapshotSet, eps_kl: f64) -> Result<KLBasis> {
    if !(eps_kl > 0.0 && eps_kl < 1.0) {
        return Err(SolverError::InvalidArgument(format!("KL truncation must lie in (0, 1), got {eps_kl}")));
    }
    let nt = snap.len();
    let cov = DMatrix::from_fn(nt, nt, |i, j| {
        snap.inner(&snap.fluctuations[i], &snap.fluctuations[j]) / nt as f64
    });
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..nt).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();

    // variance at rounding level of the mean is treated as none
    let scale = snap.inner(&snap.mean_field, &snap.mean_field).max(f64::MIN_POSITIVE);
    let lead = eigenvalues.first().copied().unwrap_or(0.0);
    if lead <= 1e-26 * scale {
        return Ok(KLBasis {
            eigenvalues: vec![0.0; nt],
            modes: Vec::new(),
            weight: snap.weight,
        });
    }
    let total: f64 = eigenvalues.iter().sum();
    let mut retained = 0;
    let mut acc = 0.0;
    for &lam in &eigenvalues {
        if lam < EIGEN_FLOOR * lead {
            break;
        }
        acc += lam;
        retained += 1;
        if acc >= (1.0 - eps_kl) * total {
            break;
        }
    }

    let mut modes: Vec<DVector<f64>> = Vec::with_capacity(retained);
    for (k, &idx) in order.iter().take(retained).enumerate() {
        let e = eig.eigenvectors.column(idx);
        let mut g = DVector::zeros(snap.mean_field.len());
        for (j, u) in snap.fluctuations.iter().enumerate() {
            g.axpy(e[j], u, 1.0);
        }
        g /= (eigenvalues[k] * nt as f64).sqrt();
        // one modified Gram-Schmidt pass against rounding drift
        for prev in &modes {
            let c = snap.inner(prev, &g);
            g.axpy(-c, prev, 1.0);
        }
        let norm = snap.inner(&g, &g).sqrt();
        g /= norm;
        modes.push(g);
    }
    Ok(KLBasis {
        eigenvalues,
        modes,
        weight: snap.weight,
    })
}

/// `zeta_i(xi_j) = (u~_j, g_i) / sqrt(lambda_i)`, an `n_t x M_Q` matrix.
pub fn kl_coefficients(snap: &SnapshotSet, basis: &KLBasis) -> DMatrix<f64> {
    let lam = basis.retained_eigenvalues();
    DMatrix::from_fn(snap.len(), basis.retained(), |j, i| {
        basis.inner(&snap.fluctuations[j], &basis.modes[i]) / lam[i].sqrt()
    })
}

/// `sum_i sqrt(lambda_i) zeta_i g_i` for one coefficient row.
pub fn kl_reconstruct(basis: &KLBasis, zeta: &[f64]) -> DVector<f64> {
    let mut out = DVector::zeros(basis.modes.first().map_or(0, |g| g.len()));
    for ((g, &lam), &z) in basis.modes.iter().zip(basis.retained_eigenvalues()).zip(zeta) {
        out.axpy(lam.sqrt() * z, g, 1.0);
    }
    out
}
