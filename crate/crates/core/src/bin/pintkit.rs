use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pintkit::harness::config::{resolve, ExperimentConfig, OUT_DIR_ENV};
use pintkit::harness::experiment::{build_experiment_surrogate, report_contraction, report_energy, run_experiment};
use pintkit::harness::report;
use pintkit::theory::{default_z_grid, max_k_alpha, sup_k_classical};

#[derive(Parser)]
#[command(name = "pintkit", version, about = "Parallel-in-time solvers for parametric PDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured solver over the evaluation samples.
    Run(Common),
    /// Build the surrogate from the training set and write it as JSON.
    Surrogate(Common),
    /// Measured error ratios against the linear contraction bound.
    Contraction(Common),
    /// Discrete energy along reference and surrogate-started solves (Allen-Cahn).
    Energy(Common),
    /// Print the resolved configuration, grid and theoretical convergence factors.
    GridInfo(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Exit nonzero unless the command's acceptance checks pass.
    #[arg(long)]
    check: bool,
    /// Use the full sample count (S = 1000).
    #[arg(long)]
    paper_scale: bool,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    resolution: Option<String>,
    #[arg(long)]
    t_final: Option<String>,
    #[arg(long)]
    n_coarse: Option<String>,
    #[arg(long)]
    j_fine: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    /// Outer tolerance; `inf` stops after the initial guess.
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    max_outer_iters: Option<String>,
    #[arg(long)]
    samples: Option<String>,
    #[arg(long)]
    training: Option<String>,
    #[arg(long)]
    eps_kl: Option<String>,
    /// gPC degree or `auto`.
    #[arg(long)]
    degree: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Comma-separated subset of parareal, pcgc, kle-pcgc.
    #[arg(long)]
    solvers: Option<String>,
    #[arg(long)]
    out_dir: Option<String>,
    /// `pcgc` or `serial`.
    #[arg(long)]
    snapshot_solver: Option<String>,
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    dump_traces: bool,
}

impl Common {
    fn overrides(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let fields = [
            ("model", &self.model),
            ("resolution", &self.resolution),
            ("t_final", &self.t_final),
            ("n_coarse", &self.n_coarse),
            ("j_fine", &self.j_fine),
            ("alpha", &self.alpha),
            ("tol", &self.tol),
            ("max_outer_iters", &self.max_outer_iters),
            ("samples", &self.samples),
            ("training", &self.training),
            ("eps_kl", &self.eps_kl),
            ("degree", &self.degree),
            ("seed", &self.seed),
            ("solvers", &self.solvers),
            ("out_dir", &self.out_dir),
            ("snapshot_solver", &self.snapshot_solver),
        ];
        for (k, v) in fields {
            if let Some(v) = v {
                out.push((k.to_string(), v.clone()));
            }
        }
        for (k, on) in [("paper_scale", self.paper_scale), ("timing", self.timing), ("dump_traces", self.dump_traces)] {
            if on {
                out.push((k.to_string(), "true".to_string()));
            }
        }
        out
    }

    fn resolve(&self) -> pintkit::Result<ExperimentConfig> {
        resolve(self.config.as_deref(), &self.overrides(), std::env::var(OUT_DIR_ENV).ok())
    }
}

fn execute(command: Command) -> pintkit::Result<ExitCode> {
    let common = match &command {
        Command::Run(c) | Command::Surrogate(c) | Command::Contraction(c) | Command::Energy(c) | Command::GridInfo(c) => {
            c.clone()
        }
    };
    let cfg = common.resolve()?;
    let mut ok = true;
    match command {
        Command::Run(_) => {
            let outcome = run_experiment(&cfg)?;
            print!("{}", report::summary(&outcome));
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            let failing = outcome.failing_solvers();
            if !failing.is_empty() {
                let names: Vec<_> = failing.iter().map(|s| s.name()).collect();
                eprintln!("more than 10% of samples failed for: {}", names.join(", "));
                return Ok(ExitCode::from(2));
            }
            ok = outcome.early_advantage() != Some(false);
        }
        Command::Surrogate(_) => {
            let s = build_experiment_surrogate(&cfg)?;
            std::fs::create_dir_all(&cfg.out_dir)?;
            let path = cfg.out_dir.join("surrogate.json");
            s.save(&path)?;
            println!(
                "{} modes, degree {}, discarded energy {:e}; wrote {}",
                s.retained(),
                s.degree,
                s.discarded_energy_ratio,
                path.display()
            );
        }
        Command::Contraction(_) => {
            let r = report_contraction(&cfg)?;
            print!("{}", report::contraction_text(&r));
            ok = !r.weighted || r.holds();
        }
        Command::Energy(_) => {
            let r = report_energy(&cfg)?;
            print!("{}", report::energy_text(&r));
            ok = r.monotone() && r.surrogate_matches();
        }
        Command::GridInfo(_) => {
            let grid = cfg.grid()?;
            let model = cfg.model_spec();
            print!("{}", cfg.to_key_values());
            println!("model {} state dim {}", model.name(), model.state_dim());
            println!(
                "T {} N {} J {} dT {:e} dt {:e}",
                grid.t_final, grid.n_coarse, grid.j_fine, grid.coarse_step, grid.fine_step
            );
            let zs = default_z_grid();
            println!("sup K classical {:e}", sup_k_classical(grid.j_fine));
            println!("sup K alpha={} {:e}", cfg.alpha, max_k_alpha(&zs, grid.j_fine, cfg.alpha)?);
        }
    }
    if common.check && !ok {
        eprintln!("acceptance checks failed");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
