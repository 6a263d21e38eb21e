//! Text and CSV renderings of experiment results.

use std::fmt::Write;

use super::experiment::{ContractionReport, EnergyReport, ErrorTable, ExperimentOutcome};
use crate::parareal::IterationTrace;

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:e}"))
}

/// `solver,k,mean_max_error,mean_iters_to_tol,wall_ms`; wall times only when `timing`.
pub fn error_csv(table: &ErrorTable, timing: bool) -> String {
    let mut out = String::from("solver,k,mean_max_error,mean_iters_to_tol,wall_ms\n");
    for s in &table.series {
        for (k, e) in s.mean_max_error.iter().enumerate() {
            let wall = if timing { format!("{:e}", s.wall_ms[k]) } else { String::new() };
            writeln!(out, "{},{k},{e:e},{:e},{wall}", s.solver.name(), s.mean_iterations).unwrap();
        }
    }
    out
}

/// `solver,k,n,mean_error` for every subinterval.
pub fn full_error_csv(table: &ErrorTable) -> String {
    let mut out = String::from("solver,k,n,mean_error\n");
    for s in &table.series {
        for (k, v) in s.mean_errors.iter().enumerate() {
            for (i, e) in v.iter().enumerate() {
                writeln!(out, "{},{k},{},{e:e}", s.solver.name(), i + 1).unwrap();
            }
        }
    }
    out
}

/// One sample's trace: `k,max_error,increment,wall_ms`.
pub fn trace_csv(trace: &IterationTrace, timing: bool) -> String {
    let mut out = String::from("k,max_error,increment,wall_ms\n");
    for r in &trace.records {
        let wall = if timing { format!("{:e}", r.wall_ms) } else { String::new() };
        writeln!(out, "{},{},{:e},{wall}", r.k, opt(r.max_error()), r.increment).unwrap();
    }
    out
}

pub fn summary(outcome: &ExperimentOutcome) -> String {
    let cfg = &outcome.config;
    let mut out = String::new();
    writeln!(out, "model {} ({} samples, seed {})", cfg.model.name(), outcome.outcomes.len(), cfg.seed).unwrap();
    if let Some(s) = &outcome.surrogate {
        writeln!(
            out,
            "surrogate: {} training, {} modes, degree {}, discarded energy {:e}",
            s.provenance.training_size,
            s.retained(),
            s.degree,
            s.discarded_energy_ratio
        )
        .unwrap();
    }
    for s in &outcome.table.series {
        let e1 = s.mean_max_error.get(1).copied();
        writeln!(
            out,
            "{:<9} mean iterations {:.2}  e0 {:e}  e1 {}  failed {}/{}",
            s.solver.name(),
            s.mean_iterations,
            s.mean_max_error[0],
            opt(e1),
            s.failed,
            s.failed + s.completed
        )
        .unwrap();
    }
    if let Some(adv) = outcome.early_advantage() {
        writeln!(out, "surrogate start ahead at k=1: {adv}").unwrap();
    }
    out
}

pub fn contraction_text(r: &ContractionReport) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "model {} alpha {:e} J {} norm {}",
        r.model.name(),
        r.alpha,
        r.j_fine,
        if r.weighted { "eigenbasis-weighted" } else { "max (bound not asserted)" }
    )
    .unwrap();
    writeln!(out, "bound pcgc {:e}  bound parareal {:e}", r.bound_alpha, r.bound_classical).unwrap();
    writeln!(out, "k,pcgc_ratio,parareal_ratio").unwrap();
    for &(k, p, c) in &r.rows {
        writeln!(out, "{k},{},{}", opt(p), opt(c)).unwrap();
    }
    if r.weighted {
        writeln!(out, "bound holds: {}", r.holds()).unwrap();
    }
    out
}

pub fn energy_text(r: &EnergyReport) -> String {
    let mut out = String::from("sample,n,reference_energy,surrogate_solve_energy\n");
    for s in &r.series {
        for (n, e) in s.reference.iter().enumerate() {
            let k = s.surrogate_solve.as_ref().map(|v| v[n]);
            writeln!(out, "{},{n},{e:e},{}", s.sample.id, opt(k)).unwrap();
        }
    }
    for s in &r.series {
        if s.max_increase() > super::experiment::ENERGY_TOL {
            writeln!(out, "# sample {}: energy increases by {:e}", s.sample.id, s.max_increase()).unwrap();
        }
    }
    writeln!(out, "# monotone: {}  surrogate solve matches: {}", r.monotone(), r.surrogate_matches()).unwrap();
    out
}
