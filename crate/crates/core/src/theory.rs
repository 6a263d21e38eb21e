//! Closed-form convergence diagnostics: stability functions, contraction factors,
//! the nonlinear rate and operator spectra.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::domain::{ParameterSample, StateVector, TimeGrid};
use crate::error::{Result, SolverError};
use crate::models::{advdiff_coefficient, ModelKind, ModelSpec};

/// Backward-Euler stability function `R(z) = 1 / (1 + z)`.
pub fn stab_backward_euler(z: Complex64) -> Result<Complex64> {
    let d = Complex64::new(1.0, 0.0) + z;
    if d.norm() == 0.0 {
        return Err(SolverError::InvalidArgument("pole of the stability function at z = -1".into()));
    }
    Ok(d.inv())
}

fn stab_real(z: f64) -> f64 {
    1.0 / (1.0 + z)
}

/// `K_cla(z, J) = |R_f^J(z/J) - R_g(z)| / (1 - |R_g(z)|)` with backward Euler for both.
pub fn k_classical(z: f64, j: usize) -> Result<f64> {
    if !(z > 0.0) {
        return Err(SolverError::InvalidArgument(format!("z must be positive, got {z}")));
    }
    if j < 1 {
        return Err(SolverError::InvalidArgument("J must be >= 1".into()));
    }
    let rg = stab_real(z);
    let rf = stab_real(z / j as f64).powi(j as i32);
    Ok((rf - rg).abs() / (1.0 - rg))
}

/// `K(z, J, alpha) = max{ |alpha R_g(z)| (1 + K_cla), K_cla }`.
pub fn k_alpha(z: f64, j: usize, alpha: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(SolverError::InvalidArgument(format!("alpha must lie in [0, 1), got {alpha}")));
    }
    let kc = k_classical(z, j)?;
    Ok(((alpha * stab_real(z)).abs() * (1.0 + kc)).max(kc))
}

/// Logarithmic grid of `count` points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    (0..count)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1).max(1) as f64))
        .collect()
}

/// `z` grid used for suprema: `[1e-4, 1e6]`, `10^4` points.
pub fn default_z_grid() -> Vec<f64> {
    log_grid(1e-4, 1e6, 10_000)
}

/// `max_z K_cla(z, J)` over [`default_z_grid`].
pub fn sup_k_classical(j: usize) -> f64 {
    default_z_grid()
        .into_iter()
        .map(|z| k_classical(z, j).expect("positive grid"))
        .fold(0.0, f64::max)
}

/// `max_m K(z_m, J, alpha)` over the given points.
pub fn max_k_alpha(zs: &[f64], j: usize, alpha: f64) -> Result<f64> {
    zs.iter().try_fold(0.0_f64, |m, &z| Ok(m.max(k_alpha(z, j, alpha)?)))
}

/// Classical rate `(e^{-L dT} + 1/(1 + L dT)) / (1 - 1/(1 + L dT))`.
pub fn rho_classical(l: f64, delta_t: f64) -> f64 {
    let x = l * delta_t;
    let r = 1.0 / (1.0 + x);
    ((-x).exp() + r) / (1.0 - r)
}

/// Nonlinear convergence rate under a one-sided Lipschitz constant `L`.
pub fn rho_alpha(l: f64, delta_t: f64, alpha: f64) -> Result<f64> {
    if !(l > 0.0) || !(delta_t > 0.0) {
        return Err(SolverError::InvalidArgument(format!(
            "L and deltaT must be positive, got {l} and {delta_t}"
        )));
    }
    let x = l * delta_t;
    if alpha.abs() / (1.0 + x) >= 1.0 {
        return Err(SolverError::InvalidArgument(format!(
            "|alpha| / (1 + L deltaT) = {} must be < 1",
            alpha.abs() / (1.0 + x)
        )));
    }
    let first = alpha.abs() * (1.0 + (-x).exp()) / x;
    let rho = first.max(rho_classical(l, delta_t));
    if rho >= 1.0 {
        log::warn!("rate {rho:.4} >= 1 for L deltaT = {x}; no contraction guaranteed");
    }
    Ok(rho)
}

/// `log(eps / e0) / log(rho)`, not rounded.
pub fn expected_iterations(eps: f64, e0_norm: f64, rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(SolverError::InvalidArgument(format!("rate must lie in (0, 1), got {rho}")));
    }
    if !(eps > 0.0 && eps <= e0_norm) {
        return Err(SolverError::InvalidArgument(format!(
            "need 0 < eps <= ||e0||, got {eps} and {e0_norm}"
        )));
    }
    Ok((eps / e0_norm).ln() / rho.ln())
}

/// `max_n ||T v_n||_inf` for a block vector `v`.
pub fn weighted_inf_norm(v: &[StateVector], transform: &DMatrix<f64>) -> Result<f64> {
    if !transform.is_square() {
        return Err(SolverError::InvalidArgument("transform must be square".into()));
    }
    if transform.clone().lu().is_invertible() {
        let mut m = 0.0_f64;
        for b in v {
            if b.len() != transform.ncols() {
                return Err(SolverError::DimensionMismatch {
                    expected: transform.ncols(),
                    got: b.len(),
                });
            }
            m = (transform * b).iter().fold(m, |acc, x| acc.max(x.abs()));
        }
        Ok(m)
    } else {
        Err(SolverError::Singular { row: 0 })
    }
}

/// Spectrum of the linear operator `A` of an affine model (`f = -A u + g`).
#[derive(Debug, Clone)]
pub struct SpectralInfo {
    /// `mu_m`.
    pub eigenvalues: Vec<Complex64>,
    /// Orthonormal eigenvectors as columns, for symmetric operators.
    pub eigenvectors: Option<DMatrix<f64>>,
    /// `z_m = deltaT mu_m`.
    pub scaled: Vec<Complex64>,
}

impl SpectralInfo {
    /// Real parts of `z_m`; exact for symmetric operators.
    pub fn scaled_real(&self) -> Vec<f64> {
        self.scaled.iter().map(|z| z.re).collect()
    }

    /// `V_A^{-1} = V_A^T` when the eigenvectors are orthonormal.
    pub fn inverse_eigenvectors(&self) -> Option<DMatrix<f64>> {
        self.eigenvectors.as_ref().map(|v| v.transpose())
    }
}

fn sine_modes(n: usize) -> (Vec<f64>, DMatrix<f64>) {
    let h = 1.0 / (n + 1) as f64;
    let s = (2.0 * h).sqrt();
    let lam = (1..=n)
        .map(|m| {
            let v = (m as f64 * std::f64::consts::PI * h / 2.0).sin();
            4.0 / (h * h) * v * v
        })
        .collect();
    let v = DMatrix::from_fn(n, n, |i, m| s * ((m + 1) as f64 * std::f64::consts::PI * (i + 1) as f64 * h).sin());
    (lam, v)
}

pub fn model_spectrum(model: &ModelSpec, xi: &ParameterSample, grid: &TimeGrid) -> Result<SpectralInfo> {
    model.check_sample(xi)?;
    let p = xi.values[0];
    let (mu, vecs): (Vec<Complex64>, Option<DMatrix<f64>>) = match model.kind {
        ModelKind::Heat1D => {
            let (lam, v) = sine_modes(model.state_dim());
            (lam.iter().map(|&l| Complex64::new(p * l, 0.0)).collect(), Some(v))
        }
        ModelKind::Diffusion2D => {
            let m = model.cells - 1;
            let a = advdiff_coefficient(p);
            let (lam, v1) = sine_modes(m);
            let mut mu = Vec::with_capacity(m * m);
            let mut v = DMatrix::zeros(m * m, m * m);
            for q in 0..m {
                for r in 0..m {
                    let col = r + q * m;
                    mu.push(Complex64::new(a * (lam[r] + lam[q]), 0.0));
                    for j in 0..m {
                        for i in 0..m {
                            v[(i + j * m, col)] = v1[(i, r)] * v1[(j, q)];
                        }
                    }
                }
            }
            (mu, Some(v))
        }
        ModelKind::ScalarDecay => (vec![Complex64::new(p, 0.0)], Some(DMatrix::identity(1, 1))),
        ModelKind::AdvectionDiffusion2D => {
            let a = model.linear_operator(xi)?.to_dense();
            (a.complex_eigenvalues().iter().copied().collect(), None)
        }
        ModelKind::Burgers1D | ModelKind::AllenCahn1D => {
            return Err(SolverError::Unsupported {
                model: model.name().into(),
                what: "spectrum of a nonlinear model".into(),
            })
        }
    };
    let scaled = mu.iter().map(|z| z * grid.coarse_step).collect();
    Ok(SpectralInfo {
        eigenvalues: mu,
        eigenvectors: vecs,
        scaled,
    })
}
