//! Method-of-lines right-hand sides and Jacobians for the benchmark problems.
//!
//! All states hold interior nodes only; Dirichlet data enters the stencils of the
//! nodes next to the boundary.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::banded::Banded;
use crate::domain::{ParameterSample, StateVector};
use crate::error::{Result, SolverError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    /// 2D advection-diffusion on `(0,1)^2`, five-point central differences.
    AdvectionDiffusion2D,
    /// The advection-diffusion problem with the advection field switched off.
    /// Symmetric operator with a closed-form sine eigenbasis.
    Diffusion2D,
    /// Viscous Burgers on `(0,1)`, first-order upwind convection.
    Burgers1D,
    /// Allen-Cahn on `(-1,1)` with `u(-1) = -1`, `u(1) = 1`.
    AllenCahn1D,
    /// Heat equation `u_t = a u_xx` on `(0,1)`; `a` is the parameter.
    Heat1D,
    /// Scalar decay `u' = -lambda u`; `lambda` is the parameter.
    ScalarDecay,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::AdvectionDiffusion2D => "advdiff2d",
            ModelKind::Diffusion2D => "diffusion2d",
            ModelKind::Burgers1D => "burgers1d",
            ModelKind::AllenCahn1D => "allencahn1d",
            ModelKind::Heat1D => "heat1d",
            ModelKind::ScalarDecay => "scalar",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "advdiff2d" | "advection-diffusion" | "advdiff" => ModelKind::AdvectionDiffusion2D,
            "diffusion2d" => ModelKind::Diffusion2D,
            "burgers1d" | "burgers" => ModelKind::Burgers1D,
            "allencahn1d" | "allen-cahn" | "allencahn" => ModelKind::AllenCahn1D,
            "heat1d" | "heat" => ModelKind::Heat1D,
            "scalar" => ModelKind::ScalarDecay,
            _ => return None,
        })
    }
}

/// A discretized benchmark: the PDE plus its uniform spatial grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Number of grid cells across the domain in each direction.
    pub cells: usize,
}

/// Value and Jacobian of the semi-discrete right-hand side.
#[derive(Debug, Clone)]
pub struct RhsEvaluation {
    pub value: StateVector,
    pub jacobian: Banded<f64>,
}

/// Diffusion coefficient `0.5 (2 + cos(pi xi)^2)` of the advection-diffusion benchmark.
pub fn advdiff_coefficient(xi: f64) -> f64 {
    let c = (PI * xi).cos();
    0.5 * (2.0 + c * c)
}

/// Source term of the advection-diffusion benchmark at `(x1, x2, t)`.
pub fn advdiff_source(x1: f64, x2: f64, t: f64, xi: f64) -> f64 {
    let s = (PI / 2.0).sin();
    let c = (PI * xi).cos();
    let phi = (PI * x1).sin() * (2.0 * PI * x2).sin();
    (-t).exp()
        * (-phi
            + 0.5 * PI * PI * (2.0 + c * c) * phi
            + 0.05 * PI * s * x2 * (PI * x1).cos() * (2.0 * PI * x2).sin()
            + 0.1 * PI * s * x1 * (PI * x1).sin() * (2.0 * PI * x2).cos())
}

/// Discrete Allen-Cahn energy on a full node set (boundary values included):
/// midpoint differences for the gradient term and the trapezoid rule for the
/// double-well potential `F(u) = (u^2 - 1)^2 / 4`.
pub fn allen_cahn_energy(nodes: &[f64], eps: f64, dx: f64) -> f64 {
    let potential = |u: f64| {
        let w = u * u - 1.0;
        0.25 * w * w
    };
    let gradient: f64 = nodes
        .windows(2)
        .map(|w| {
            let d = (w[1] - w[0]) / dx;
            d * d
        })
        .sum::<f64>()
        * 0.5
        * eps
        * dx;
    let last = nodes.len() - 1;
    let well: f64 = nodes
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let w = if i == 0 || i == last { 0.5 } else { 1.0 };
            w * potential(u)
        })
        .sum::<f64>()
        * dx;
    gradient + well
}

impl ModelSpec {
    /// Advection-diffusion with mesh size `h = 1 / inv_h`.
    pub fn advection_diffusion(inv_h: usize) -> Self {
        Self {
            kind: ModelKind::AdvectionDiffusion2D,
            cells: inv_h,
        }
    }

    pub fn diffusion2d(inv_h: usize) -> Self {
        Self {
            kind: ModelKind::Diffusion2D,
            cells: inv_h,
        }
    }

    /// Burgers with `dx = 1 / inv_dx`.
    pub fn burgers(inv_dx: usize) -> Self {
        Self {
            kind: ModelKind::Burgers1D,
            cells: inv_dx,
        }
    }

    /// Allen-Cahn on `(-1, 1)` with `dx = 1 / inv_dx` (so `2 * inv_dx` cells).
    pub fn allen_cahn(inv_dx: usize) -> Self {
        Self {
            kind: ModelKind::AllenCahn1D,
            cells: 2 * inv_dx,
        }
    }

    pub fn heat1d(cells: usize) -> Self {
        Self {
            kind: ModelKind::Heat1D,
            cells,
        }
    }

    pub fn scalar_decay() -> Self {
        Self {
            kind: ModelKind::ScalarDecay,
            cells: 1,
        }
    }

    /// Benchmark defaults: `h = 1/20`, `dx = 1/100`, `dx = 1/128`.
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::AdvectionDiffusion2D => Self::advection_diffusion(20),
            ModelKind::Diffusion2D => Self::diffusion2d(20),
            ModelKind::Burgers1D => Self::burgers(100),
            ModelKind::AllenCahn1D => Self::allen_cahn(128),
            ModelKind::Heat1D => Self::heat1d(32),
            ModelKind::ScalarDecay => Self::scalar_decay(),
        }
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    /// Grid spacing `h` / `dx`.
    pub fn spacing(&self) -> f64 {
        match self.kind {
            ModelKind::AllenCahn1D => 2.0 / self.cells as f64,
            ModelKind::ScalarDecay => 1.0,
            _ => 1.0 / self.cells as f64,
        }
    }

    /// Spatial dimension `d` of the domain (0 for the scalar test model).
    pub fn spatial_dim(&self) -> usize {
        match self.kind {
            ModelKind::AdvectionDiffusion2D | ModelKind::Diffusion2D => 2,
            ModelKind::ScalarDecay => 0,
            _ => 1,
        }
    }

    pub fn domain(&self) -> Vec<(f64, f64)> {
        match self.kind {
            ModelKind::AdvectionDiffusion2D | ModelKind::Diffusion2D => vec![(0.0, 1.0); 2],
            ModelKind::AllenCahn1D => vec![(-1.0, 1.0)],
            ModelKind::ScalarDecay => vec![],
            _ => vec![(0.0, 1.0)],
        }
    }

    fn interior_per_dim(&self) -> usize {
        self.cells - 1
    }

    /// State dimension `N_x` (interior node count).
    pub fn state_dim(&self) -> usize {
        match self.kind {
            ModelKind::AdvectionDiffusion2D | ModelKind::Diffusion2D => {
                let m = self.interior_per_dim();
                m * m
            }
            ModelKind::ScalarDecay => 1,
            _ => self.interior_per_dim(),
        }
    }

    pub fn parameter_dim(&self) -> usize {
        1
    }

    /// Support interval of each parameter coordinate.
    pub fn supports(&self) -> Vec<(f64, f64)> {
        vec![match self.kind {
            ModelKind::AdvectionDiffusion2D | ModelKind::Diffusion2D => (2.0, 6.0),
            ModelKind::Burgers1D => (1.0, 3.0),
            ModelKind::AllenCahn1D => (0.06, 1.0),
            ModelKind::Heat1D => (0.5, 2.0),
            ModelKind::ScalarDecay => (1e-3, 1e3),
        }]
    }

    /// `f` affine in `u` (constant Jacobian).
    pub fn is_linear(&self) -> bool {
        !matches!(self.kind, ModelKind::Burgers1D | ModelKind::AllenCahn1D)
    }

    /// Jacobian bandwidth (equal lower and upper).
    pub fn bandwidth(&self) -> usize {
        match self.kind {
            ModelKind::AdvectionDiffusion2D | ModelKind::Diffusion2D => self.interior_per_dim(),
            ModelKind::ScalarDecay => 0,
            _ => 1,
        }
    }

    /// Coordinates of 1D interior nodes.
    pub fn nodes_1d(&self) -> Vec<f64> {
        let (lo, _) = self.domain().first().copied().unwrap_or((0.0, 1.0));
        let h = self.spacing();
        (1..self.cells).map(|i| lo + i as f64 * h).collect()
    }

    /// Coordinates `(x1, x2)` of the 2D interior nodes, `x1` varying fastest.
    pub fn nodes_2d(&self) -> Vec<(f64, f64)> {
        let m = self.interior_per_dim();
        let h = self.spacing();
        let mut out = Vec::with_capacity(m * m);
        for j in 1..=m {
            for i in 1..=m {
                out.push((i as f64 * h, j as f64 * h));
            }
        }
        out
    }

    fn check_state(&self, u: &StateVector) -> Result<()> {
        if u.len() != self.state_dim() {
            return Err(SolverError::DimensionMismatch {
                expected: self.state_dim(),
                got: u.len(),
            });
        }
        Ok(())
    }

    fn check_param(&self, xi: &ParameterSample) -> Result<f64> {
        if xi.dim() != self.parameter_dim() {
            return Err(SolverError::DimensionMismatch {
                expected: self.parameter_dim(),
                got: xi.dim(),
            });
        }
        Ok(xi.values[0])
    }

    /// Validates a sample against the declared dimension and supports.
    pub fn check_sample(&self, xi: &ParameterSample) -> Result<()> {
        xi.validate(&self.supports())
    }

    /// Linear operator `A` of an affine model `f(u, t) = -A u + g(t)`.
    pub fn linear_operator(&self, xi: &ParameterSample) -> Result<Banded<f64>> {
        let p = self.check_param(xi)?;
        match self.kind {
            ModelKind::AdvectionDiffusion2D => Ok(self.advdiff_operator(advdiff_coefficient(p), true)),
            ModelKind::Diffusion2D => Ok(self.advdiff_operator(advdiff_coefficient(p), false)),
            ModelKind::Heat1D => Ok(laplacian_1d(self.interior_per_dim(), self.spacing()).scaled(-p)),
            ModelKind::ScalarDecay => {
                let mut a = Banded::zeros(1, 0, 0);
                a.set(0, 0, p);
                Ok(a)
            }
            _ => Err(SolverError::Unsupported {
                model: self.name().into(),
                what: "linear operator of a nonlinear model".into(),
            }),
        }
    }

    /// Source `g(t)` of an affine model.
    pub fn source(&self, t: f64, xi: &ParameterSample) -> Result<StateVector> {
        let p = self.check_param(xi)?;
        match self.kind {
            ModelKind::AdvectionDiffusion2D | ModelKind::Diffusion2D => Ok(DVector::from_iterator(
                self.state_dim(),
                self.nodes_2d().into_iter().map(|(x1, x2)| advdiff_source(x1, x2, t, p)),
            )),
            ModelKind::Heat1D | ModelKind::ScalarDecay => Ok(DVector::zeros(self.state_dim())),
            _ => Err(SolverError::Unsupported {
                model: self.name().into(),
                what: "source of a nonlinear model".into(),
            }),
        }
    }

    // -a Lap_h + b . grad_h, homogeneous Dirichlet
    fn advdiff_operator(&self, a: f64, advection: bool) -> Banded<f64> {
        let m = self.interior_per_dim();
        let h = self.spacing();
        let n = m * m;
        let s = (PI / 2.0).sin();
        let mut op = Banded::zeros(n, m, m);
        let diff = a / (h * h);
        for j in 1..=m {
            for i in 1..=m {
                let k = (i - 1) + (j - 1) * m;
                let (x1, x2) = (i as f64 * h, j as f64 * h);
                let (b1, b2) = if advection {
                    (0.1 * s * x2, 0.1 * s * x1)
                } else {
                    (0.0, 0.0)
                };
                op.set(k, k, 4.0 * diff);
                if i > 1 {
                    op.set(k, k - 1, -diff - b1 / (2.0 * h));
                }
                if i < m {
                    op.set(k, k + 1, -diff + b1 / (2.0 * h));
                }
                if j > 1 {
                    op.set(k, k - m, -diff - b2 / (2.0 * h));
                }
                if j < m {
                    op.set(k, k + m, -diff + b2 / (2.0 * h));
                }
            }
        }
        op
    }

    /// Right-hand side `f(u, t; xi)`.
    pub fn rhs(&self, u: &StateVector, t: f64, xi: &ParameterSample) -> Result<StateVector> {
        self.check_state(u)?;
        let p = self.check_param(xi)?;
        match self.kind {
            ModelKind::Burgers1D => Ok(self.burgers_value(u, p)),
            ModelKind::AllenCahn1D => Ok(self.allen_cahn_value(u, p)),
            _ => {
                let a = self.linear_operator(xi)?;
                let g = self.source(t, xi)?;
                Ok(g - a.mul_vec(u))
            }
        }
    }

    /// Jacobian `df/du` at `(u, t)`.
    pub fn jacobian(&self, u: &StateVector, t: f64, xi: &ParameterSample) -> Result<Banded<f64>> {
        let _ = t;
        self.check_state(u)?;
        let p = self.check_param(xi)?;
        match self.kind {
            ModelKind::Burgers1D => Ok(self.burgers_jacobian(u, p)),
            ModelKind::AllenCahn1D => Ok(self.allen_cahn_jacobian(u, p)),
            _ => Ok(self.linear_operator(xi)?.scaled(-1.0)),
        }
    }

    pub fn evaluate(&self, u: &StateVector, t: f64, xi: &ParameterSample) -> Result<RhsEvaluation> {
        Ok(RhsEvaluation {
            value: self.rhs(u, t, xi)?,
            jacobian: self.jacobian(u, t, xi)?,
        })
    }

    /// Burgers viscosity `nu = eps / 50`.
    pub fn burgers_viscosity(eps: f64) -> f64 {
        eps / 50.0
    }

    fn burgers_value(&self, u: &StateVector, eps: f64) -> StateVector {
        let n = u.len();
        let dx = self.spacing();
        let nu = Self::burgers_viscosity(eps);
        let at = |i: isize| -> f64 {
            if i < 0 || i as usize >= n {
                0.0
            } else {
                u[i as usize]
            }
        };
        DVector::from_fn(n, |i, _| {
            let i = i as isize;
            let (ul, uc, ur) = (at(i - 1), at(i), at(i + 1));
            let conv = if uc >= 0.0 {
                uc * (uc - ul) / dx
            } else {
                uc * (ur - uc) / dx
            };
            -conv + nu * (ur - 2.0 * uc + ul) / (dx * dx)
        })
    }

    fn burgers_jacobian(&self, u: &StateVector, eps: f64) -> Banded<f64> {
        let n = u.len();
        let dx = self.spacing();
        let nu = Self::burgers_viscosity(eps);
        let mut jac = laplacian_1d(n, dx).scaled(nu);
        for i in 0..n {
            let uc = u[i];
            let ul = if i > 0 { u[i - 1] } else { 0.0 };
            let ur = if i + 1 < n { u[i + 1] } else { 0.0 };
            if uc >= 0.0 {
                jac.add_to(i, i, -(2.0 * uc - ul) / dx);
                if i > 0 {
                    jac.add_to(i, i - 1, uc / dx);
                }
            } else {
                jac.add_to(i, i, -(ur - 2.0 * uc) / dx);
                if i + 1 < n {
                    jac.add_to(i, i + 1, -uc / dx);
                }
            }
        }
        jac
    }

    /// Dirichlet values of the Allen-Cahn problem.
    pub const ALLEN_CAHN_BOUNDARY: (f64, f64) = (-1.0, 1.0);

    fn allen_cahn_value(&self, u: &StateVector, eps: f64) -> StateVector {
        let n = u.len();
        let dx = self.spacing();
        let (left, right) = Self::ALLEN_CAHN_BOUNDARY;
        DVector::from_fn(n, |i, _| {
            let ul = if i > 0 { u[i - 1] } else { left };
            let ur = if i + 1 < n { u[i + 1] } else { right };
            let uc = u[i];
            eps * (ur - 2.0 * uc + ul) / (dx * dx) - (uc * uc * uc - uc)
        })
    }

    fn allen_cahn_jacobian(&self, u: &StateVector, eps: f64) -> Banded<f64> {
        let mut jac = laplacian_1d(u.len(), self.spacing()).scaled(eps);
        for (i, &uc) in u.iter().enumerate() {
            jac.add_to(i, i, -(3.0 * uc * uc - 1.0));
        }
        jac
    }

    /// Interior state extended with the Dirichlet values (1D models only).
    pub fn with_boundary(&self, u: &StateVector) -> Vec<f64> {
        let (l, r) = match self.kind {
            ModelKind::AllenCahn1D => Self::ALLEN_CAHN_BOUNDARY,
            _ => (0.0, 0.0),
        };
        std::iter::once(l)
            .chain(u.iter().copied())
            .chain(std::iter::once(r))
            .collect()
    }

    /// Allen-Cahn energy of an interior state, boundary values lifted in.
    pub fn energy(&self, u: &StateVector, xi: &ParameterSample) -> Result<f64> {
        if self.kind != ModelKind::AllenCahn1D {
            return Err(SolverError::Unsupported {
                model: self.name().into(),
                what: "energy functional".into(),
            });
        }
        self.check_state(u)?;
        let eps = self.check_param(xi)?;
        Ok(allen_cahn_energy(&self.with_boundary(u), eps, self.spacing()))
    }

    /// Nodal sampling of the initial profile.
    pub fn initial_condition(&self, xi: &ParameterSample) -> StateVector {
        let _ = xi;
        match self.kind {
            ModelKind::AdvectionDiffusion2D | ModelKind::Diffusion2D => DVector::from_iterator(
                self.state_dim(),
                self.nodes_2d()
                    .into_iter()
                    .map(|(x1, x2)| (PI * x1).sin() * (2.0 * PI * x2).sin()),
            ),
            ModelKind::Burgers1D => {
                DVector::from_iterator(self.state_dim(), self.nodes_1d().into_iter().map(|x| (2.0 * PI * x).sin()))
            }
            ModelKind::AllenCahn1D => DVector::from_iterator(
                self.state_dim(),
                self.nodes_1d()
                    .into_iter()
                    .map(|x| 0.53 * x + 0.47 * (-1.5 * PI * x).sin()),
            ),
            ModelKind::Heat1D => DVector::from_iterator(
                self.state_dim(),
                self.nodes_1d()
                    .into_iter()
                    .map(|x| (PI * x).sin() + 0.5 * (3.0 * PI * x).sin()),
            ),
            ModelKind::ScalarDecay => DVector::from_element(1, 1.0),
        }
    }
}

/// Second-difference matrix `(u_{i+1} - 2 u_i + u_{i-1}) / h^2` with zero Dirichlet data.
pub fn laplacian_1d(n: usize, h: f64) -> Banded<f64> {
    let mut l = Banded::zeros(n, 1, 1);
    let c = 1.0 / (h * h);
    for i in 0..n {
        l.set(i, i, -2.0 * c);
        if i > 0 {
            l.set(i, i - 1, c);
        }
        if i + 1 < n {
            l.set(i, i + 1, c);
        }
    }
    l
}
