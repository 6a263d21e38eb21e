//! Experiment driver: sampling, surrogate construction, solver sweeps and reports.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;

use super::config::{Distribution, ExperimentConfig, SolverKind};
use super::report;
use crate::domain::{CoarseTrajectory, ParameterSample, TimeGrid};
use crate::error::{Result, SolverError};
use crate::klgpc::{build_surrogate, KLGpcSurrogate};
use crate::models::{ModelKind, ModelSpec};
use crate::parareal::{parareal_solve, random_initial_guess, IterationTrace, SolveOptions};
use crate::pcgc::pcgc_solve;
use crate::propagators::Propagators;
use crate::sampling::{sample_truncated_gaussian, sample_uniform, RngStream};
use crate::theory::{max_k_alpha, model_spectrum, weighted_inf_norm};

/// Sub-stream indices of the root seed.
const TRAINING_STREAM: u64 = 0;
const EVALUATION_STREAM: u64 = 1;
const INIT_STREAM_BASE: u64 = 1 << 32;

pub fn draw_samples(dist: Distribution, count: usize, rng: &mut RngStream) -> Result<Vec<ParameterSample>> {
    match dist {
        Distribution::Uniform { lo, hi } => sample_uniform(lo, hi, count, rng),
        Distribution::TruncatedGaussian { mu, sigma, lo, hi } => sample_truncated_gaussian(mu, sigma, lo, hi, count, rng),
    }
}

pub fn training_samples(cfg: &ExperimentConfig) -> Result<Vec<ParameterSample>> {
    draw_samples(cfg.distribution(), cfg.training, &mut RngStream::new(cfg.seed).split(TRAINING_STREAM))
}

pub fn evaluation_samples(cfg: &ExperimentConfig) -> Result<Vec<ParameterSample>> {
    draw_samples(cfg.distribution(), cfg.samples, &mut RngStream::new(cfg.seed).split(EVALUATION_STREAM))
}

/// Random initial guess of sample `id`; shared by every solver that starts from one.
pub fn random_guess_for(cfg: &ExperimentConfig, u0: &crate::domain::StateVector, id: usize) -> CoarseTrajectory {
    let mut rng = RngStream::new(cfg.seed).split(INIT_STREAM_BASE + id as u64);
    random_initial_guess(u0, cfg.n_coarse, &mut rng)
}

pub fn build_experiment_surrogate(cfg: &ExperimentConfig) -> Result<KLGpcSurrogate> {
    let model = cfg.model_spec();
    let grid = cfg.grid()?;
    let training = training_samples(cfg)?;
    build_surrogate(
        &model,
        &grid,
        &cfg.solver_config(),
        &training,
        cfg.eps_kl,
        cfg.degree,
        cfg.snapshot_solver,
    )
}

/// Traces of every enabled solver for one evaluation sample.
#[derive(Debug)]
pub struct SampleOutcome {
    pub sample: ParameterSample,
    pub traces: Vec<(SolverKind, std::result::Result<IterationTrace, String>)>,
}

pub fn run_sample(
    cfg: &ExperimentConfig,
    model: &ModelSpec,
    grid: &TimeGrid,
    xi: &ParameterSample,
    surrogate: Option<&KLGpcSurrogate>,
) -> Result<SampleOutcome> {
    let scfg = cfg.solver_config();
    let props = Propagators::new(model, xi, grid, &scfg)?;
    let u0 = model.initial_condition(xi);
    let reference = props.fine_reference(&u0)?;
    let opts = SolveOptions {
        reference: Some(&reference),
        keep_trajectories: false,
    };
    let random = random_guess_for(cfg, &u0, xi.id);
    let traces = cfg
        .solvers
        .iter()
        .map(|&kind| {
            let r = match kind {
                SolverKind::Parareal => parareal_solve(model, xi, grid, &scfg, &random, opts),
                SolverKind::Pcgc => pcgc_solve(model, xi, grid, &scfg, &random, opts),
                SolverKind::KlePcgc => match surrogate {
                    Some(s) => s.predict(xi).and_then(|init| pcgc_solve(model, xi, grid, &scfg, &init, opts)),
                    None => Err(SolverError::Config("surrogate missing".into())),
                },
            };
            (kind, r.map_err(|e| e.to_string()))
        })
        .collect();
    Ok(SampleOutcome {
        sample: xi.clone(),
        traces,
    })
}

/// Mean-error curves of one solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSeries {
    pub solver: SolverKind,
    /// Per `k`, mean over samples of `e_n^k`, `n = 1..N`.
    pub mean_errors: Vec<Vec<f64>>,
    /// Per `k`, `max_n` of the mean vector.
    pub mean_max_error: Vec<f64>,
    pub mean_iterations: f64,
    /// Per `k`, mean wall time since solve start.
    pub wall_ms: Vec<f64>,
    pub completed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTable {
    pub series: Vec<SolverSeries>,
}

impl ErrorTable {
    pub fn get(&self, solver: SolverKind) -> Option<&SolverSeries> {
        self.series.iter().find(|s| s.solver == solver)
    }
}

/// Average over samples; a sample that stopped before `k` contributes its final errors.
pub fn aggregate(solvers: &[SolverKind], outcomes: &[SampleOutcome]) -> ErrorTable {
    let series = solvers
        .iter()
        .map(|&solver| {
            let traces: Vec<&IterationTrace> = outcomes
                .iter()
                .filter_map(|o| o.traces.iter().find(|(k, _)| *k == solver))
                .filter_map(|(_, r)| r.as_ref().ok())
                .collect();
            let failed = outcomes.len() - traces.len();
            let kmax = traces.iter().map(|t| t.iterations()).max().unwrap_or(0);
            let n = traces
                .iter()
                .find_map(|t| t.records[0].errors.as_ref().map(|e| e.len()))
                .unwrap_or(0);
            let mut mean_errors = Vec::with_capacity(kmax + 1);
            let mut wall_ms = Vec::with_capacity(kmax + 1);
            for k in 0..=kmax {
                let mut acc = vec![0.0; n];
                let mut wall = 0.0;
                for t in &traces {
                    let rec = &t.records[k.min(t.records.len() - 1)];
                    if let Some(e) = &rec.errors {
                        for (a, v) in acc.iter_mut().zip(e) {
                            *a += v;
                        }
                    }
                    wall += rec.wall_ms;
                }
                let count = traces.len().max(1) as f64;
                mean_errors.push(acc.into_iter().map(|a| a / count).collect::<Vec<_>>());
                wall_ms.push(wall / count);
            }
            let mean_max_error = mean_errors
                .iter()
                .map(|v| v.iter().copied().fold(0.0, f64::max))
                .collect();
            let mean_iterations = if traces.is_empty() {
                f64::NAN
            } else {
                traces.iter().map(|t| t.iterations() as f64).sum::<f64>() / traces.len() as f64
            };
            SolverSeries {
                solver,
                mean_errors,
                mean_max_error,
                mean_iterations,
                wall_ms,
                completed: traces.len(),
                failed,
            }
        })
        .collect();
    ErrorTable { series }
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub config: ExperimentConfig,
    pub table: ErrorTable,
    pub outcomes: Vec<SampleOutcome>,
    pub surrogate: Option<KLGpcSurrogate>,
    pub files: Vec<PathBuf>,
}

impl ExperimentOutcome {
    /// Solvers failing on more than 10% of samples.
    pub fn failing_solvers(&self) -> Vec<SolverKind> {
        self.table
            .series
            .iter()
            .filter(|s| s.failed as f64 > 0.1 * self.outcomes.len() as f64)
            .map(|s| s.solver)
            .collect()
    }

    /// Surrogate start beats parareal at `k = 1` (when both ran).
    pub fn early_advantage(&self) -> Option<bool> {
        let kle = self.table.get(SolverKind::KlePcgc)?;
        let par = self.table.get(SolverKind::Parareal)?;
        Some(kle.mean_max_error.get(1).copied().unwrap_or(kle.mean_max_error[0]) < par.mean_max_error.get(1).copied().unwrap_or(par.mean_max_error[0]))
    }
}

/// Full experiment; writes the surrogate, CSV tables and a text summary to `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let model = cfg.model_spec();
    let grid = cfg.grid()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut files = Vec::new();

    let surrogate = if cfg.solvers.contains(&SolverKind::KlePcgc) {
        let s = build_experiment_surrogate(cfg)?;
        let path = cfg.out_dir.join("surrogate.json");
        s.save(&path)?;
        files.push(path);
        log::info!("surrogate: {} modes, degree {}", s.retained(), s.degree);
        Some(s)
    } else {
        None
    };

    let evals = evaluation_samples(cfg)?;
    let outcomes = evals
        .par_iter()
        .map(|xi| run_sample(cfg, &model, &grid, xi, surrogate.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    for o in &outcomes {
        for (kind, r) in &o.traces {
            if let Err(e) = r {
                log::warn!("sample {} solver {}: {e}", o.sample.id, kind.name());
            }
        }
    }
    let table = aggregate(&cfg.solvers, &outcomes);

    let write = |name: &str, text: String, files: &mut Vec<PathBuf>| -> Result<()> {
        let path = cfg.out_dir.join(name);
        std::fs::write(&path, text)?;
        files.push(path);
        Ok(())
    };
    write("errors.csv", report::error_csv(&table, cfg.timing), &mut files)?;
    write("errors_full.csv", report::full_error_csv(&table), &mut files)?;
    if cfg.dump_traces {
        let dir = cfg.out_dir.join("traces");
        std::fs::create_dir_all(&dir)?;
        for o in &outcomes {
            for (kind, r) in &o.traces {
                if let Ok(t) = r {
                    let path = dir.join(format!("{}_{}.csv", kind.name(), o.sample.id));
                    std::fs::write(&path, report::trace_csv(t, cfg.timing))?;
                }
            }
        }
    }
    let outcome = ExperimentOutcome {
        config: cfg.clone(),
        table,
        outcomes,
        surrogate,
        files: Vec::new(),
    };
    write("summary.txt", report::summary(&outcome), &mut files)?;
    Ok(ExperimentOutcome { files, ..outcome })
}

/// Measured per-iteration error ratios next to the linear contraction bound.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    pub model: ModelKind,
    pub alpha: f64,
    pub j_fine: usize,
    /// Whether the norm is the eigenbasis-weighted one (symmetric operator).
    pub weighted: bool,
    pub bound_alpha: f64,
    pub bound_classical: f64,
    /// Per `k >= 1`: (pcgc ratio, parareal ratio); `None` once below the floor.
    pub rows: Vec<(usize, Option<f64>, Option<f64>)>,
}

/// Errors below this are at the rounding floor and excluded from ratios.
pub const ROUNDING_FLOOR: f64 = 1e-13;

impl ContractionReport {
    /// Every pre-floor ratio within its bound plus `1e-6`.
    pub fn holds(&self) -> bool {
        self.rows.iter().all(|&(_, p, c)| {
            p.is_none_or(|r| r <= self.bound_alpha + 1e-6) && c.is_none_or(|r| r <= self.bound_classical + 1e-6)
        })
    }
}

fn error_norms(trace: &IterationTrace, reference: &CoarseTrajectory, transform: &nalgebra::DMatrix<f64>) -> Result<Vec<f64>> {
    trace
        .records
        .iter()
        .map(|r| {
            let t = r.trajectory.as_ref().expect("trajectories kept");
            let diff: Vec<_> = t.states.iter().zip(&reference.states).map(|(a, b)| a - b).collect();
            weighted_inf_norm(&diff, transform)
        })
        .collect()
}

fn ratios(norms: &[f64]) -> Vec<Option<f64>> {
    norms
        .windows(2)
        .map(|w| (w[0] > ROUNDING_FLOOR && w[1] > ROUNDING_FLOOR).then(|| w[1] / w[0]))
        .collect()
}

pub fn report_contraction(cfg: &ExperimentConfig) -> Result<ContractionReport> {
    let model = cfg.model_spec();
    if !model.is_linear() {
        return Err(SolverError::Unsupported {
            model: model.name().into(),
            what: "contraction report needs a linear model".into(),
        });
    }
    let grid = cfg.grid()?;
    let scfg = cfg.solver_config();
    let xi = evaluation_samples(cfg)?.remove(0);
    let spectrum = model_spectrum(&model, &xi, &grid)?;
    let zs = spectrum.scaled_real();
    let (transform, weighted) = match spectrum.inverse_eigenvectors() {
        Some(t) => (t, true),
        None => (nalgebra::DMatrix::identity(model.state_dim(), model.state_dim()), false),
    };
    let bound_alpha = max_k_alpha(&zs, grid.j_fine, cfg.alpha)?;
    let bound_classical = max_k_alpha(&zs, grid.j_fine, 0.0)?;

    let props = Propagators::new(&model, &xi, &grid, &scfg)?;
    let u0 = model.initial_condition(&xi);
    let reference = props.fine_reference(&u0)?;
    let init = random_guess_for(cfg, &u0, xi.id);
    let opts = SolveOptions {
        reference: Some(&reference),
        keep_trajectories: true,
    };
    let unwrap_trace = |r: Result<IterationTrace>| match r {
        Ok(t) => Ok(t),
        Err(SolverError::MaxItersExceeded { trace, .. }) => Ok(*trace),
        Err(e) => Err(e),
    };
    let pcgc = unwrap_trace(pcgc_solve(&model, &xi, &grid, &scfg, &init, opts))?;
    let par = unwrap_trace(parareal_solve(&model, &xi, &grid, &scfg, &init, opts))?;
    let rp = ratios(&error_norms(&pcgc, &reference, &transform)?);
    let rc = ratios(&error_norms(&par, &reference, &transform)?);
    let len = rp.len().max(rc.len());
    let rows = (0..len)
        .map(|i| (i + 1, rp.get(i).copied().flatten(), rc.get(i).copied().flatten()))
        .collect();
    Ok(ContractionReport {
        model: cfg.model,
        alpha: cfg.alpha,
        j_fine: grid.j_fine,
        weighted,
        bound_alpha,
        bound_classical,
        rows,
    })
}

/// Energy `E(T_n)`, `n = 0..N`, along a trajectory.
pub fn trajectory_energy(model: &ModelSpec, xi: &ParameterSample, traj: &CoarseTrajectory) -> Result<Vec<f64>> {
    std::iter::once(&traj.initial)
        .chain(&traj.states)
        .map(|u| model.energy(u, xi))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergySeries {
    pub sample: ParameterSample,
    pub reference: Vec<f64>,
    pub surrogate_solve: Option<Vec<f64>>,
}

impl EnergySeries {
    /// Largest `E(T_{n+1}) - E(T_n)` along the reference.
    pub fn max_increase(&self) -> f64 {
        self.reference
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_gap(&self) -> Option<f64> {
        self.surrogate_solve.as_ref().map(|e| {
            e.iter()
                .zip(&self.reference)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub series: Vec<EnergySeries>,
}

pub const ENERGY_TOL: f64 = 1e-8;

impl EnergyReport {
    pub fn monotone(&self) -> bool {
        self.series.iter().all(|s| s.max_increase() <= ENERGY_TOL)
    }

    pub fn surrogate_matches(&self) -> bool {
        self.series.iter().all(|s| s.max_gap().is_none_or(|g| g <= ENERGY_TOL))
    }
}

pub fn report_energy(cfg: &ExperimentConfig) -> Result<EnergyReport> {
    let model = cfg.model_spec();
    if model.kind != ModelKind::AllenCahn1D {
        return Err(SolverError::Unsupported {
            model: model.name().into(),
            what: "energy report is defined for Allen-Cahn only".into(),
        });
    }
    let grid = cfg.grid()?;
    let scfg = cfg.solver_config();
    let surrogate = if cfg.solvers.contains(&SolverKind::KlePcgc) {
        Some(build_experiment_surrogate(cfg)?)
    } else {
        None
    };
    let series = evaluation_samples(cfg)?
        .par_iter()
        .map(|xi| {
            let props = Propagators::new(&model, xi, &grid, &scfg)?;
            let reference = props.fine_reference(&model.initial_condition(xi))?;
            let surrogate_solve = match &surrogate {
                Some(s) => {
                    let opts = SolveOptions {
                        reference: Some(&reference),
                        keep_trajectories: false,
                    };
                    let t = pcgc_solve(&model, xi, &grid, &scfg, &s.predict(xi)?, opts)?;
                    Some(trajectory_energy(&model, xi, &t.final_trajectory)?)
                }
                None => None,
            };
            Ok(EnergySeries {
                sample: xi.clone(),
                reference: trajectory_energy(&model, xi, &reference)?,
                surrogate_solve,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EnergyReport { series })
}

/// Failure count per solver.
pub fn failure_counts(outcomes: &[SampleOutcome]) -> BTreeMap<SolverKind, usize> {
    let mut m = BTreeMap::new();
    for o in outcomes {
        for (k, r) in &o.traces {
            *m.entry(*k).or_insert(0) += usize::from(r.is_err());
        }
    }
    m
}
