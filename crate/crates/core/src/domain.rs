//! Shared domain types: time grids, parameter samples, states, trajectories
//! and solver configuration.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SolverError};

/// Spatially discretized field (length `N_x`).
pub type StateVector = DVector<f64>;

/// Max-norm of a state.
pub fn inf_norm(v: &StateVector) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Max-norm of `a - b` without allocating.
pub fn inf_dist(a: &StateVector, b: &StateVector) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Uniform coarse/fine time grid over `[0, t_final]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_final: f64,
    /// Number of coarse subintervals.
    pub n_coarse: usize,
    /// Fine steps per coarse step.
    pub j_fine: usize,
    pub coarse_step: f64,
    pub fine_step: f64,
}

impl TimeGrid {
    /// Grid with `n_coarse` subintervals of `j_fine` fine steps each. `J >= 2` is required
    /// for a proper fine/coarse split; use [`TimeGrid::with_refinement`] for `J = 1`.
    pub fn new(t_final: f64, n_coarse: usize, j_fine: usize) -> Result<Self> {
        if j_fine < 2 {
            return Err(SolverError::InvalidArgument(format!(
                "fine refinement J must be >= 2, got {j_fine}"
            )));
        }
        Self::with_refinement(t_final, n_coarse, j_fine)
    }

    /// Like [`TimeGrid::new`] but also admits the degenerate refinement `J = 1`
    /// (fine propagator identical to the coarse one).
    pub fn with_refinement(t_final: f64, n_coarse: usize, j_fine: usize) -> Result<Self> {
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(SolverError::InvalidArgument(format!(
                "final time must be positive and finite, got {t_final}"
            )));
        }
        if n_coarse < 1 {
            return Err(SolverError::InvalidArgument(
                "number of coarse intervals must be >= 1".into(),
            ));
        }
        if j_fine < 1 {
            return Err(SolverError::InvalidArgument(
                "fine refinement must be >= 1".into(),
            ));
        }
        let coarse_step = t_final / n_coarse as f64;
        Ok(Self {
            t_final,
            n_coarse,
            j_fine,
            coarse_step,
            fine_step: coarse_step / j_fine as f64,
        })
    }

    /// Coarse point `T_n = n * deltaT`.
    pub fn coarse_point(&self, n: usize) -> f64 {
        if n == self.n_coarse {
            self.t_final
        } else {
            n as f64 * self.coarse_step
        }
    }

    pub fn coarse_points(&self) -> Vec<f64> {
        (0..=self.n_coarse).map(|n| self.coarse_point(n)).collect()
    }

    /// Fine points `t_{n,j}` inside coarse interval `n`, endpoints included.
    pub fn fine_points(&self, n: usize) -> Vec<f64> {
        let t0 = self.coarse_point(n);
        (0..=self.j_fine)
            .map(|j| {
                if j == self.j_fine {
                    self.coarse_point(n + 1)
                } else {
                    t0 + j as f64 * self.fine_step
                }
            })
            .collect()
    }
}

/// One realization of the random input vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSample {
    pub id: usize,
    pub values: Vec<f64>,
}

impl ParameterSample {
    pub fn new(id: usize, values: Vec<f64>) -> Self {
        Self { id, values }
    }

    pub fn scalar(id: usize, value: f64) -> Self {
        Self {
            id,
            values: vec![value],
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Checks the dimension and that every coordinate lies in its support interval.
    pub fn validate(&self, supports: &[(f64, f64)]) -> Result<()> {
        if self.values.len() != supports.len() {
            return Err(SolverError::DimensionMismatch {
                expected: supports.len(),
                got: self.values.len(),
            });
        }
        for (index, (&value, &(lo, hi))) in self.values.iter().zip(supports).enumerate() {
            if !(value >= lo && value <= hi) {
                return Err(SolverError::OutOfSupport {
                    index,
                    value,
                    lo,
                    hi,
                });
            }
        }
        Ok(())
    }
}

/// Coarse-grid states `U_1..U_N` together with the initial state at `T_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseTrajectory {
    pub initial: StateVector,
    pub states: Vec<StateVector>,
}

impl CoarseTrajectory {
    pub fn new(initial: StateVector, states: Vec<StateVector>) -> Self {
        Self { initial, states }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.initial.len()
    }

    /// Per-coarse-point max-norm discrepancy against `other`.
    pub fn errors_against(&self, other: &CoarseTrajectory) -> Vec<f64> {
        self.states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| inf_dist(a, b))
            .collect()
    }

    /// `max_n ||U_n - V_n||_inf`.
    pub fn max_error_against(&self, other: &CoarseTrajectory) -> f64 {
        self.errors_against(other)
            .into_iter()
            .fold(0.0, f64::max)
    }

    /// Concatenate `U_1..U_N` into one space-time vector (block `n` holds `U_{n+1}`).
    pub fn flatten(&self) -> DVector<f64> {
        let nx = self.state_dim();
        let mut out = DVector::zeros(nx * self.states.len());
        for (n, s) in self.states.iter().enumerate() {
            out.rows_mut(n * nx, nx).copy_from(s);
        }
        out
    }

    /// Inverse of [`CoarseTrajectory::flatten`].
    pub fn from_flat(initial: StateVector, flat: &DVector<f64>) -> Result<Self> {
        let nx = initial.len();
        if nx == 0 || flat.len() % nx != 0 {
            return Err(SolverError::DimensionMismatch {
                expected: nx,
                got: flat.len(),
            });
        }
        let states = (0..flat.len() / nx)
            .map(|n| flat.rows(n * nx, nx).into_owned())
            .collect();
        Ok(Self { initial, states })
    }

    pub fn is_finite(&self) -> bool {
        self.initial.iter().all(|x| x.is_finite())
            && self.states.iter().all(|s| s.iter().all(|x| x.is_finite()))
    }
}

/// How the initial coarse trajectory `U^0` is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitMode {
    /// i.i.d. uniform entries in `[-1, 1]` scaled by `||u_0||_inf`.
    RandomGuess,
    /// One serial sweep of the coarse propagator from `u_0`.
    CoarseSweep,
    /// Prediction of a KL/gPC surrogate.
    Surrogate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Coupling `U_0 = alpha U_N` of the diagonalized coarse system.
    pub alpha: f64,
    /// Outer stopping tolerance.
    pub tol: f64,
    pub max_outer_iters: usize,
    /// Newton cap for a single implicit step.
    pub max_newton_iters: usize,
    pub newton_tol: f64,
    /// Cap for the simplified Newton loop of the coupled coarse system.
    pub max_coupled_newton_iters: usize,
    pub init_mode: InitMode,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            tol: 1e-10,
            max_outer_iters: 100,
            max_newton_iters: 50,
            newton_tol: 1e-12,
            max_coupled_newton_iters: 20,
            init_mode: InitMode::RandomGuess,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(SolverError::InvalidArgument(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.tol > 0.0) {
            return Err(SolverError::InvalidArgument(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if !(self.newton_tol > 0.0) {
            return Err(SolverError::InvalidArgument(format!(
                "Newton tolerance must be positive, got {}",
                self.newton_tol
            )));
        }
        Ok(())
    }
}
