//! Experiment configuration: benchmark presets, flat `key = value` files and overrides.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::domain::{SolverConfig, TimeGrid};
use crate::error::{Result, SolverError};
use crate::klgpc::SnapshotSolver;
use crate::models::{ModelKind, ModelSpec};

/// Environment variable overriding the output directory of the config file.
pub const OUT_DIR_ENV: &str = "PINTKIT_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SolverKind {
    Parareal,
    Pcgc,
    KlePcgc,
}

impl SolverKind {
    pub const ALL: [SolverKind; 3] = [SolverKind::Parareal, SolverKind::Pcgc, SolverKind::KlePcgc];

    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::Parareal => "parareal",
            SolverKind::Pcgc => "pcgc",
            SolverKind::KlePcgc => "kle-pcgc",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// Parameter distribution of the random input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distribution {
    Uniform { lo: f64, hi: f64 },
    TruncatedGaussian { mu: f64, sigma: f64, lo: f64, hi: f64 },
}

impl Distribution {
    pub fn for_model(kind: ModelKind) -> Self {
        match kind {
            ModelKind::AllenCahn1D => Distribution::TruncatedGaussian {
                mu: 0.53,
                sigma: 0.15,
                lo: 0.06,
                hi: 1.0,
            },
            _ => {
                let (lo, hi) = ModelSpec::default_for(kind).supports()[0];
                Distribution::Uniform { lo, hi }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    /// `1/h` (2D) or `1/dx` (1D).
    pub resolution: usize,
    pub t_final: f64,
    pub n_coarse: usize,
    pub j_fine: usize,
    pub alpha: f64,
    pub tol: f64,
    pub max_outer_iters: usize,
    /// Evaluation samples `S`.
    pub samples: usize,
    /// Training-set size `n_t`.
    pub training: usize,
    pub eps_kl: f64,
    /// `None` selects the default degree policy.
    pub degree: Option<usize>,
    pub seed: u64,
    pub solvers: Vec<SolverKind>,
    pub out_dir: PathBuf,
    pub snapshot_solver: SnapshotSolver,
    /// Fill the `wall_ms` column; makes the CSV machine dependent.
    pub timing: bool,
    /// Write per-sample traces.
    pub dump_traces: bool,
}

pub const KEYS: [&str; 19] = [
    "model",
    "resolution",
    "t_final",
    "n_coarse",
    "j_fine",
    "alpha",
    "tol",
    "max_outer_iters",
    "samples",
    "training",
    "eps_kl",
    "degree",
    "seed",
    "solvers",
    "out_dir",
    "snapshot_solver",
    "timing",
    "dump_traces",
    "paper_scale",
];

impl ExperimentConfig {
    /// Benchmark settings at desk scale (`S = 20`).
    pub fn preset(model: ModelKind) -> Self {
        let (resolution, t_final, n_coarse, j_fine, training) = match model {
            ModelKind::AdvectionDiffusion2D | ModelKind::Diffusion2D => (20, 1.0, 24, 50, 10),
            ModelKind::Burgers1D => (100, 2.0, 25, 40, 36),
            ModelKind::AllenCahn1D => (128, 30.0, 30, 48, 10),
            ModelKind::Heat1D => (32, 1.0, 16, 20, 10),
            ModelKind::ScalarDecay => (1, 1.0, 16, 20, 10),
        };
        let solvers = match model {
            ModelKind::Burgers1D | ModelKind::AllenCahn1D => vec![SolverKind::Parareal, SolverKind::KlePcgc],
            _ => SolverKind::ALL.to_vec(),
        };
        Self {
            model,
            resolution,
            t_final,
            n_coarse,
            j_fine,
            alpha: 0.1,
            tol: 1e-10,
            max_outer_iters: 100,
            samples: 20,
            training,
            eps_kl: 1e-10,
            degree: None,
            seed: 2024,
            solvers,
            out_dir: PathBuf::from("out"),
            snapshot_solver: SnapshotSolver::Pcgc,
            timing: false,
            dump_traces: false,
        }
    }

    pub fn model_spec(&self) -> ModelSpec {
        match self.model {
            ModelKind::AdvectionDiffusion2D => ModelSpec::advection_diffusion(self.resolution),
            ModelKind::Diffusion2D => ModelSpec::diffusion2d(self.resolution),
            ModelKind::Burgers1D => ModelSpec::burgers(self.resolution),
            ModelKind::AllenCahn1D => ModelSpec::allen_cahn(self.resolution),
            ModelKind::Heat1D => ModelSpec::heat1d(self.resolution),
            ModelKind::ScalarDecay => ModelSpec::scalar_decay(),
        }
    }

    /// `J = 1` is accepted (fine and coarse propagators coincide).
    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::with_refinement(self.t_final, self.n_coarse, self.j_fine)
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            alpha: self.alpha,
            tol: self.tol,
            max_outer_iters: self.max_outer_iters,
            seed: self.seed,
            ..SolverConfig::default()
        }
    }

    pub fn distribution(&self) -> Distribution {
        Distribution::for_model(self.model)
    }

    /// Set one key from its textual value.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| SolverError::Config(format!("invalid value {value:?} for {key}: {what}"));
        fn num<T: std::str::FromStr>(v: &str, key: &str) -> Result<T> {
            v.parse()
                .map_err(|_| SolverError::Config(format!("invalid value {v:?} for {key}")))
        }
        match key {
            "model" => {
                self.model = ModelKind::from_name(value).ok_or_else(|| bad("unknown model"))?;
            }
            "resolution" => self.resolution = num(value, key)?,
            "t_final" => self.t_final = num(value, key)?,
            "n_coarse" => self.n_coarse = num(value, key)?,
            "j_fine" => self.j_fine = num(value, key)?,
            "alpha" => self.alpha = num(value, key)?,
            "tol" => self.tol = if value == "inf" { f64::INFINITY } else { num(value, key)? },
            "max_outer_iters" => self.max_outer_iters = num(value, key)?,
            "samples" => self.samples = num(value, key)?,
            "training" => self.training = num(value, key)?,
            "eps_kl" => self.eps_kl = num(value, key)?,
            "degree" => {
                self.degree = if value == "auto" { None } else { Some(num(value, key)?) };
            }
            "seed" => self.seed = num(value, key)?,
            "solvers" => {
                self.solvers = value
                    .split(',')
                    .map(|s| SolverKind::from_name(s.trim()).ok_or_else(|| bad("unknown solver")))
                    .collect::<Result<_>>()?;
            }
            "out_dir" => self.out_dir = PathBuf::from(value),
            "snapshot_solver" => {
                self.snapshot_solver = match value {
                    "pcgc" => SnapshotSolver::Pcgc,
                    "serial" => SnapshotSolver::SerialFine,
                    _ => return Err(bad("expected pcgc or serial")),
                }
            }
            "timing" => self.timing = parse_bool(value).ok_or_else(|| bad("expected a boolean"))?,
            "dump_traces" => self.dump_traces = parse_bool(value).ok_or_else(|| bad("expected a boolean"))?,
            "paper_scale" => {
                if parse_bool(value).ok_or_else(|| bad("expected a boolean"))? {
                    self.samples = 1000;
                }
            }
            _ => return Err(SolverError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        self.solver_config().validate()?;
        if self.resolution < 2 && self.model != ModelKind::ScalarDecay {
            return Err(SolverError::Config("resolution must be >= 2".into()));
        }
        if self.samples == 0 {
            return Err(SolverError::Config("samples must be >= 1".into()));
        }
        if self.solvers.is_empty() {
            return Err(SolverError::Config("no solvers selected".into()));
        }
        if self.solvers.contains(&SolverKind::KlePcgc) {
            if self.training == 0 {
                return Err(SolverError::Config("training must be >= 1".into()));
            }
            if !(self.eps_kl > 0.0 && self.eps_kl < 1.0) {
                return Err(SolverError::Config(format!("eps_kl must lie in (0, 1), got {}", self.eps_kl)));
            }
        }
        Ok(())
    }

    /// Resolved settings as `key = value` lines.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let solvers: Vec<&str> = self.solvers.iter().map(|k| k.name()).collect();
        let _ = writeln!(s, "model = {}", self.model.name());
        let _ = writeln!(s, "resolution = {}", self.resolution);
        let _ = writeln!(s, "t_final = {}", self.t_final);
        let _ = writeln!(s, "n_coarse = {}", self.n_coarse);
        let _ = writeln!(s, "j_fine = {}", self.j_fine);
        let _ = writeln!(s, "alpha = {}", self.alpha);
        let _ = writeln!(s, "tol = {}", if self.tol.is_infinite() { "inf".to_string() } else { self.tol.to_string() });
        let _ = writeln!(s, "max_outer_iters = {}", self.max_outer_iters);
        let _ = writeln!(s, "samples = {}", self.samples);
        let _ = writeln!(s, "training = {}", self.training);
        let _ = writeln!(s, "eps_kl = {}", self.eps_kl);
        let _ = writeln!(s, "degree = {}", self.degree.map_or("auto".to_string(), |d| d.to_string()));
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "solvers = {}", solvers.join(","));
        let _ = writeln!(s, "out_dir = {}", self.out_dir.display());
        let _ = writeln!(
            s,
            "snapshot_solver = {}",
            match self.snapshot_solver {
                SnapshotSolver::Pcgc => "pcgc",
                SnapshotSolver::SerialFine => "serial",
            }
        );
        let _ = writeln!(s, "timing = {}", self.timing);
        let _ = writeln!(s, "dump_traces = {}", self.dump_traces);
        s
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Some(true),
        "false" | "0" | "no" | "off" => Some(false),
        _ => None,
    }
}

/// Parse flat `key = value` text. `#` starts a comment; unknown keys are errors.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| SolverError::Config(format!("line {}: expected key = value", lineno + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(SolverError::Config(format!("line {}: unknown key {k:?}", lineno + 1)));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(SolverError::Config(format!("line {}: duplicate key {k:?}", lineno + 1)));
        }
    }
    Ok(out)
}

/// Resolve a configuration: preset of the chosen model, then the file, then the
/// environment (output directory only), then explicit overrides.
pub fn resolve(
    file: Option<&Path>,
    overrides: &[(String, String)],
    env_out_dir: Option<String>,
) -> Result<ExperimentConfig> {
    let file_kv = match file {
        Some(p) => parse_key_values(&std::fs::read_to_string(p)?)?,
        None => BTreeMap::new(),
    };
    let model_name = overrides
        .iter()
        .rev()
        .find(|(k, _)| k == "model")
        .map(|(_, v)| v.as_str())
        .or(file_kv.get("model").map(String::as_str))
        .unwrap_or("advdiff2d");
    let model = ModelKind::from_name(model_name)
        .ok_or_else(|| SolverError::Config(format!("unknown model {model_name:?}")))?;
    let mut cfg = ExperimentConfig::preset(model);
    // paper_scale first so that an explicit sample count still wins
    for (k, v) in file_kv.iter().filter(|(k, _)| *k == "paper_scale").chain(file_kv.iter().filter(|(k, _)| *k != "paper_scale")) {
        cfg.apply(k, v)?;
    }
    if let Some(dir) = env_out_dir {
        cfg.out_dir = PathBuf::from(dir);
    }
    for (k, v) in overrides.iter().filter(|(k, _)| k == "paper_scale").chain(overrides.iter().filter(|(k, _)| k != "paper_scale")) {
        if !KEYS.contains(&k.as_str()) {
            return Err(SolverError::Config(format!("unknown key {k:?}")));
        }
        cfg.apply(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}
