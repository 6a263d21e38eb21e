//! Classical parareal with sequential coarse-grid correction, and the iteration
//! trace shared by every outer solver.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{inf_dist, inf_norm, CoarseTrajectory, ParameterSample, SolverConfig, StateVector, TimeGrid};
use crate::error::{Result, SolverError};
use crate::models::ModelSpec;
use crate::propagators::Propagators;
use crate::sampling::RngStream;

/// Which quantity decides convergence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopMetric {
    /// `max_n ||U_n^k - u_n||_inf` against the fine serial reference.
    ReferenceError,
    /// `max_n ||U_n^k - U_n^{k-1}||_inf`.
    Increment,
}

/// One outer iteration. `k = 0` is the initial guess.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    /// `e_n^k` for `n = 1..N`, present when a reference was supplied.
    pub errors: Option<Vec<f64>>,
    /// Infinite at `k = 0`.
    pub increment: f64,
    /// Time since the solve started.
    pub wall_ms: f64,
    pub trajectory: Option<CoarseTrajectory>,
}

impl IterationRecord {
    pub fn max_error(&self) -> Option<f64> {
        self.errors.as_ref().map(|e| e.iter().copied().fold(0.0, f64::max))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
    pub stop_metric: StopMetric,
    pub converged: bool,
    pub final_trajectory: CoarseTrajectory,
}

impl IterationTrace {
    /// Iterations performed, excluding the initial guess.
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.k)
    }

    pub fn max_errors(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.max_error()).collect()
    }

    pub fn record(&self, k: usize) -> Option<&IterationRecord> {
        self.records.get(k)
    }
}

/// Per-solve knobs that do not belong to [`SolverConfig`].
#[derive(Debug, Clone, Copy, Default)]
pub struct SolveOptions<'a> {
    /// Fine serial reference; when given, convergence is measured against it.
    pub reference: Option<&'a CoarseTrajectory>,
    /// Keep `U^k` for every `k` in the trace.
    pub keep_trajectories: bool,
}

pub(crate) struct TraceBuilder<'a> {
    start: Instant,
    opts: SolveOptions<'a>,
    tol: f64,
    max_iters: usize,
    records: Vec<IterationRecord>,
}

impl<'a> TraceBuilder<'a> {
    pub(crate) fn new(cfg: &SolverConfig, opts: SolveOptions<'a>) -> Self {
        Self {
            start: Instant::now(),
            opts,
            tol: cfg.tol,
            max_iters: cfg.max_outer_iters,
            records: Vec::new(),
        }
    }

    fn metric(&self) -> StopMetric {
        if self.opts.reference.is_some() {
            StopMetric::ReferenceError
        } else {
            StopMetric::Increment
        }
    }

    /// Record `U^k`. Returns `Ok(Some(trace))` when the solve is finished.
    pub(crate) fn push(
        &mut self,
        k: usize,
        current: &CoarseTrajectory,
        previous: Option<&CoarseTrajectory>,
    ) -> Result<Option<IterationTrace>> {
        let errors = self.opts.reference.map(|r| current.errors_against(r));
        let increment = match previous {
            Some(p) => current
                .states
                .iter()
                .zip(&p.states)
                .map(|(a, b)| inf_dist(a, b))
                .fold(0.0, f64::max),
            None => f64::INFINITY,
        };
        let record = IterationRecord {
            k,
            errors,
            increment,
            wall_ms: self.start.elapsed().as_secs_f64() * 1e3,
            trajectory: self.opts.keep_trajectories.then(|| current.clone()),
        };
        let value = match self.metric() {
            StopMetric::ReferenceError => record.max_error().unwrap_or(f64::INFINITY),
            StopMetric::Increment => increment,
        };
        self.records.push(record);
        let done = value <= self.tol;
        if done || k >= self.max_iters {
            let trace = IterationTrace {
                records: std::mem::take(&mut self.records),
                stop_metric: self.metric(),
                converged: done,
                final_trajectory: current.clone(),
            };
            if done {
                return Ok(Some(trace));
            }
            return Err(SolverError::MaxItersExceeded {
                max: self.max_iters,
                trace: Box::new(trace),
            });
        }
        Ok(None)
    }
}

/// Initial coarse trajectory with i.i.d. entries in `[-1, 1]` scaled by `||u_0||_inf`.
pub fn random_initial_guess(u0: &StateVector, n_coarse: usize, rng: &mut RngStream) -> CoarseTrajectory {
    let scale = inf_norm(u0);
    let states = (0..n_coarse)
        .map(|_| StateVector::from_iterator(u0.len(), (0..u0.len()).map(|_| scale * rng.uniform(-1.0, 1.0))))
        .collect();
    CoarseTrajectory::new(u0.clone(), states)
}

/// Start value of coarse interval `n`: `u_0` on the first, `U_n` otherwise.
pub(crate) fn interval_start<'t>(traj: &'t CoarseTrajectory, n: usize) -> &'t StateVector {
    if n == 0 {
        &traj.initial
    } else {
        &traj.states[n - 1]
    }
}

/// Fine sweeps over all coarse intervals, concurrently.
pub(crate) fn fine_sweeps(props: &Propagators<'_>, traj: &CoarseTrajectory) -> Result<Vec<StateVector>> {
    (0..traj.len())
        .into_par_iter()
        .map(|n| props.fine(interval_start(traj, n), n))
        .collect()
}

/// Classical parareal iteration from `init`.
pub fn parareal_solve(
    model: &ModelSpec,
    xi: &ParameterSample,
    grid: &TimeGrid,
    cfg: &SolverConfig,
    init: &CoarseTrajectory,
    opts: SolveOptions<'_>,
) -> Result<IterationTrace> {
    cfg.validate()?;
    check_init(model, grid, init)?;
    let props = Propagators::new(model, xi, grid, cfg)?;
    let mut trace = TraceBuilder::new(cfg, opts);
    let mut current = init.clone();
    if let Some(t) = trace.push(0, &current, None)? {
        return Ok(t);
    }
    // G(U_n^k) for every interval, reused as the old coarse value of the next correction
    let mut coarse_old: Vec<StateVector> = (0..grid.n_coarse)
        .into_par_iter()
        .map(|n| props.coarse(interval_start(&current, n), n))
        .collect::<Result<_>>()?;
    for k in 1.. {
        let fine = fine_sweeps(&props, &current)?;
        let mut states = Vec::with_capacity(grid.n_coarse);
        let mut coarse_new = Vec::with_capacity(grid.n_coarse);
        let mut start = current.initial.clone();
        for n in 0..grid.n_coarse {
            let g = props.coarse(&start, n)?;
            // F + (G_new - G_old) is exact once the start value has stopped changing
            let next = &fine[n] + (&g - &coarse_old[n]);
            coarse_new.push(g);
            states.push(next.clone());
            start = next;
        }
        let next = CoarseTrajectory::new(current.initial.clone(), states);
        coarse_old = coarse_new;
        if let Some(t) = trace.push(k, &next, Some(&current))? {
            return Ok(t);
        }
        current = next;
    }
    unreachable!("outer loop exits through the trace")
}

pub(crate) fn check_init(model: &ModelSpec, grid: &TimeGrid, init: &CoarseTrajectory) -> Result<()> {
    if init.len() != grid.n_coarse {
        return Err(SolverError::DimensionMismatch {
            expected: grid.n_coarse,
            got: init.len(),
        });
    }
    let nx = model.state_dim();
    if let Some(bad) = std::iter::once(&init.initial).chain(&init.states).find(|s| s.len() != nx) {
        return Err(SolverError::DimensionMismatch {
            expected: nx,
            got: bad.len(),
        });
    }
    Ok(())
}
