//! Backward-Euler fine and coarse propagators.
//!
//! Affine models take one banded solve per step with a factorization cached per step
//! size; nonlinear models run Newton with the analytic Jacobian.

use crate::banded::BandedLu;
use crate::domain::{inf_norm, CoarseTrajectory, ParameterSample, SolverConfig, StateVector, TimeGrid};
use crate::error::{Result, SolverError};
use crate::models::ModelSpec;

/// One backward-Euler step size bound to a model and a parameter sample.
#[derive(Debug, Clone)]
pub struct ImplicitStepper<'a> {
    model: &'a ModelSpec,
    xi: &'a ParameterSample,
    dt: f64,
    newton_tol: f64,
    max_newton_iters: usize,
    // factors of I + dt A for affine models
    linear: Option<BandedLu<f64>>,
}

impl<'a> ImplicitStepper<'a> {
    pub fn new(model: &'a ModelSpec, xi: &'a ParameterSample, dt: f64, cfg: &SolverConfig) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(SolverError::InvalidArgument(format!("step must be positive, got {dt}")));
        }
        let linear = if model.is_linear() {
            let a = model.linear_operator(xi)?;
            Some(a.scale_shift(dt, 1.0).lu()?)
        } else {
            None
        };
        Ok(Self {
            model,
            xi,
            dt,
            newton_tol: cfg.newton_tol,
            max_newton_iters: cfg.max_newton_iters,
            linear,
        })
    }

    pub fn step_size(&self) -> f64 {
        self.dt
    }

    /// Solve `(v - u) / dt = f(v, t_end)`.
    pub fn step_to(&self, u: &StateVector, t_end: f64) -> Result<StateVector> {
        if u.len() != self.model.state_dim() {
            return Err(SolverError::DimensionMismatch {
                expected: self.model.state_dim(),
                got: u.len(),
            });
        }
        match &self.linear {
            Some(lu) => {
                let rhs = u + self.model.source(t_end, self.xi)? * self.dt;
                Ok(lu.solve_vec(&rhs))
            }
            None => self.newton(u, t_end),
        }
    }

    fn newton(&self, u: &StateVector, t_end: f64) -> Result<StateVector> {
        let dt = self.dt;
        let mut v = u.clone();
        let mut residual = f64::INFINITY;
        for _ in 0..self.max_newton_iters {
            let eval = self.model.evaluate(&v, t_end, self.xi)?;
            let r = (&v - u) / dt - &eval.value;
            residual = inf_norm(&r);
            if residual <= self.newton_tol {
                return Ok(v);
            }
            // (I - dt J) delta = -dt r
            let lu = eval.jacobian.scale_shift(-dt, 1.0).lu()?;
            let delta = lu.solve_vec(&(r * -dt));
            v += &delta;
            // an update at rounding level means the residual sits on its floating-point floor
            if inf_norm(&delta) <= 16.0 * f64::EPSILON * (1.0 + inf_norm(&v)) {
                return Ok(v);
            }
        }
        Err(SolverError::NonConvergence {
            iters: self.max_newton_iters,
            residual,
        })
    }
}

/// One backward-Euler step of size `dt` from `t_from`.
pub fn backward_euler_step(
    u: &StateVector,
    t_from: f64,
    dt: f64,
    model: &ModelSpec,
    xi: &ParameterSample,
    cfg: &SolverConfig,
) -> Result<StateVector> {
    ImplicitStepper::new(model, xi, dt, cfg)?.step_to(u, t_from + dt)
}

fn check_interval(t_from: f64, t_to: f64, grid: &TimeGrid) -> Result<()> {
    let span = t_to - t_from;
    if (span - grid.coarse_step).abs() > 1e-9 * grid.coarse_step.max(1.0) {
        return Err(SolverError::InvalidArgument(format!(
            "interval [{t_from}, {t_to}] does not span one coarse step {}",
            grid.coarse_step
        )));
    }
    Ok(())
}

/// Fine propagator: `J` backward-Euler steps of size `deltat` across `[t_from, t_to]`.
#[allow(non_snake_case)]
pub fn propagate_F(
    u: &StateVector,
    t_from: f64,
    t_to: f64,
    grid: &TimeGrid,
    model: &ModelSpec,
    xi: &ParameterSample,
    cfg: &SolverConfig,
) -> Result<StateVector> {
    check_interval(t_from, t_to, grid)?;
    let stepper = ImplicitStepper::new(model, xi, grid.fine_step, cfg)?;
    fine_sweep(&stepper, u, t_from, t_to, grid.j_fine)
}

/// Coarse propagator: a single backward-Euler step across `[t_from, t_to]`.
#[allow(non_snake_case)]
pub fn propagate_G(
    u: &StateVector,
    t_from: f64,
    t_to: f64,
    grid: &TimeGrid,
    model: &ModelSpec,
    xi: &ParameterSample,
    cfg: &SolverConfig,
) -> Result<StateVector> {
    check_interval(t_from, t_to, grid)?;
    ImplicitStepper::new(model, xi, grid.coarse_step, cfg)?.step_to(u, t_to)
}

fn fine_sweep(stepper: &ImplicitStepper<'_>, u: &StateVector, t_from: f64, t_to: f64, steps: usize) -> Result<StateVector> {
    let mut v = u.clone();
    for j in 1..=steps {
        let t = if j == steps {
            t_to
        } else {
            t_from + j as f64 * stepper.step_size()
        };
        v = stepper.step_to(&v, t)?;
    }
    Ok(v)
}

/// Fine and coarse propagators for one sample, with cached factorizations.
#[derive(Debug, Clone)]
pub struct Propagators<'a> {
    pub model: &'a ModelSpec,
    pub xi: &'a ParameterSample,
    pub grid: &'a TimeGrid,
    fine: ImplicitStepper<'a>,
    coarse: ImplicitStepper<'a>,
}

impl<'a> Propagators<'a> {
    pub fn new(model: &'a ModelSpec, xi: &'a ParameterSample, grid: &'a TimeGrid, cfg: &SolverConfig) -> Result<Self> {
        Ok(Self {
            model,
            xi,
            grid,
            fine: ImplicitStepper::new(model, xi, grid.fine_step, cfg)?,
            coarse: ImplicitStepper::new(model, xi, grid.coarse_step, cfg)?,
        })
    }

    /// `F(T_n, T_{n+1}, u)`.
    pub fn fine(&self, u: &StateVector, n: usize) -> Result<StateVector> {
        fine_sweep(
            &self.fine,
            u,
            self.grid.coarse_point(n),
            self.grid.coarse_point(n + 1),
            self.grid.j_fine,
        )
    }

    /// `G(T_n, T_{n+1}, u)`.
    pub fn coarse(&self, u: &StateVector, n: usize) -> Result<StateVector> {
        self.coarse.step_to(u, self.grid.coarse_point(n + 1))
    }

    /// Serial fine solution at the coarse points; the reference for all error metrics.
    pub fn fine_reference(&self, u0: &StateVector) -> Result<CoarseTrajectory> {
        let mut states = Vec::with_capacity(self.grid.n_coarse);
        let mut u = u0.clone();
        for n in 0..self.grid.n_coarse {
            u = self.fine(&u, n)?;
            states.push(u.clone());
        }
        Ok(CoarseTrajectory::new(u0.clone(), states))
    }

    /// One serial coarse sweep from `u0`.
    pub fn coarse_sweep(&self, u0: &StateVector) -> Result<CoarseTrajectory> {
        let mut states = Vec::with_capacity(self.grid.n_coarse);
        let mut u = u0.clone();
        for n in 0..self.grid.n_coarse {
            u = self.coarse(&u, n)?;
            states.push(u.clone());
        }
        Ok(CoarseTrajectory::new(u0.clone(), states))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn scalar(lambda: f64) -> (ModelSpec, ParameterSample) {
        (ModelSpec::scalar_decay(), ParameterSample::scalar(0, lambda))
    }

    #[test]
    fn scalar_stability_function() {
        let (m, xi) = scalar(1.0);
        let cfg = SolverConfig::default();
        let v = backward_euler_step(&DVector::from_element(1, 1.0), 0.0, 1.0, &m, &xi, &cfg).unwrap();
        assert!((v[0] - 0.5).abs() < 1e-15);
        let (m, xi) = scalar(3.0);
        let v = backward_euler_step(&DVector::from_element(1, 2.0), 0.0, 0.1, &m, &xi, &cfg).unwrap();
        assert!((v[0] - 2.0 / 1.3).abs() < 1e-15);
    }

    #[test]
    fn fine_power_closed_form() {
        let (m, xi) = scalar(1.0);
        let cfg = SolverConfig::default();
        let grid = TimeGrid::new(1.0, 1, 50).unwrap();
        let v = propagate_F(&DVector::from_element(1, 1.0), 0.0, 1.0, &grid, &m, &xi, &cfg).unwrap();
        let expected = (1.0f64 + 1.0 / 50.0).powi(-50);
        assert!((v[0] - expected).abs() < 1e-14);
        assert!((v[0] - 0.371528).abs() < 1e-6);
    }

    #[test]
    fn refinement_one_is_coarse_step() {
        let m = ModelSpec::burgers(20);
        let xi = ParameterSample::scalar(0, 2.0);
        let cfg = SolverConfig::default();
        let grid = TimeGrid::with_refinement(0.4, 5, 1).unwrap();
        let u = m.initial_condition(&xi);
        let f = propagate_F(&u, 0.08, 0.16, &grid, &m, &xi, &cfg).unwrap();
        let g = propagate_G(&u, 0.08, 0.16, &grid, &m, &xi, &cfg).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn interval_must_match_coarse_step() {
        let (m, xi) = scalar(1.0);
        let cfg = SolverConfig::default();
        let grid = TimeGrid::new(1.0, 4, 2).unwrap();
        let u = DVector::from_element(1, 1.0);
        assert!(propagate_G(&u, 0.0, 0.5, &grid, &m, &xi, &cfg).is_err());
        assert!(propagate_F(&u, 0.0, 0.3, &grid, &m, &xi, &cfg).is_err());
    }

    #[test]
    fn nonpositive_step_rejected() {
        let (m, xi) = scalar(1.0);
        let cfg = SolverConfig::default();
        assert!(backward_euler_step(&DVector::from_element(1, 1.0), 0.0, 0.0, &m, &xi, &cfg).is_err());
    }

    #[test]
    fn newton_residual_defining_property() {
        let cfg = SolverConfig::default();
        for (m, p, dt) in [
            (ModelSpec::burgers(100), 2.0, 0.002),
            (ModelSpec::burgers(100), 1.0, 0.08),
            (ModelSpec::allen_cahn(128), 0.5, 1.0 / 48.0),
            (ModelSpec::allen_cahn(128), 0.06, 1.0),
        ] {
            let xi = ParameterSample::scalar(0, p);
            let u = m.initial_condition(&xi);
            let v = backward_euler_step(&u, 0.0, dt, &m, &xi, &cfg).unwrap();
            let r = (&v - &u) / dt - m.rhs(&v, dt, &xi).unwrap();
            // tolerance or the floating-point floor of the residual, whichever is larger
            let floor = 64.0 * f64::EPSILON * (p / (m.spacing() * m.spacing()) + 1.0 / dt);
            assert!(inf_norm(&r) <= cfg.newton_tol.max(floor), "{} residual {}", m.name(), inf_norm(&r));
        }
    }

    #[test]
    fn newton_cap_reports_nonconvergence() {
        let m = ModelSpec::allen_cahn(32);
        let xi = ParameterSample::scalar(0, 0.5);
        let cfg = SolverConfig {
            max_newton_iters: 1,
            ..SolverConfig::default()
        };
        let u = m.initial_condition(&xi);
        let r = backward_euler_step(&u, 0.0, 1.0, &m, &xi, &cfg);
        assert!(matches!(r, Err(SolverError::NonConvergence { .. })));
    }

    #[test]
    fn fine_composition_matches_stepwise() {
        let m = ModelSpec::burgers(50);
        let xi = ParameterSample::scalar(0, 1.5);
        let cfg = SolverConfig::default();
        let grid = TimeGrid::new(0.4, 5, 4).unwrap();
        let props = Propagators::new(&m, &xi, &grid, &cfg).unwrap();
        let u0 = m.initial_condition(&xi);
        let two = props.fine(&props.fine(&u0, 1).unwrap(), 2).unwrap();
        let stepper = ImplicitStepper::new(&m, &xi, grid.fine_step, &cfg).unwrap();
        let mut v = u0.clone();
        for n in 1..=2 {
            for j in 1..=grid.j_fine {
                let t = if j == grid.j_fine {
                    grid.coarse_point(n + 1)
                } else {
                    grid.coarse_point(n) + j as f64 * grid.fine_step
                };
                v = stepper.step_to(&v, t).unwrap();
            }
        }
        assert_eq!(two, v);
    }
}
