//! Parallel coarse-grid correction by diagonalization of the alpha-circulant
//! all-at-once coarse system.
//!
//! The coarse problem on `[0, T]` with the twisted closure `U_0 = alpha U_N` reads
//! `(C_alpha (x) I - dT (I (x) J)) u = r`. `C_alpha = V diag(lambda) V^{-1}` with
//! `V = D^{-1} F`, `D = diag(alpha^{j/N})` and `F` the unitary Fourier matrix, so the
//! system decouples into `N` independent complex shifted solves.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{FftDirection, FftPlanner};

use crate::banded::{Banded, BandedLu};
use crate::domain::{inf_dist, CoarseTrajectory, ParameterSample, SolverConfig, StateVector, TimeGrid};
use crate::error::{Result, SolverError};
use crate::models::ModelSpec;
use crate::parareal::{check_init, fine_sweeps, IterationTrace, SolveOptions, TraceBuilder};
use crate::propagators::Propagators;

/// Eigen-structure of `C_alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaCirculantSpec {
    pub n: usize,
    pub alpha: f64,
    /// `lambda_k = 1 - alpha^{1/N} omega^{-k}`, `omega = exp(2 pi i / N)`.
    pub eigenvalues: Vec<Complex64>,
    /// `alpha^{j/N}`, `j = 0..N-1`.
    pub scaling: Vec<f64>,
}

pub fn build_alpha_circulant(n: usize, alpha: f64) -> Result<AlphaCirculantSpec> {
    if n < 1 {
        return Err(SolverError::InvalidArgument("alpha-circulant size must be >= 1".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(SolverError::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let root = alpha.powf(1.0 / n as f64);
    let eigenvalues = (0..n)
        .map(|k| {
            let theta = -2.0 * std::f64::consts::PI * k as f64 / n as f64;
            Complex64::new(1.0, 0.0) - Complex64::from_polar(root, theta)
        })
        .collect();
    let scaling = (0..n).map(|j| alpha.powf(j as f64 / n as f64)).collect();
    let spec = AlphaCirculantSpec {
        n,
        alpha,
        eigenvalues,
        scaling,
    };
    debug_assert!(spec.eigen_residual() <= 1e-10);
    Ok(spec)
}

impl AlphaCirculantSpec {
    /// Dense `C_alpha`: unit diagonal, `-1` below, `-alpha` in the top-right corner.
    pub fn c_alpha(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut c = DMatrix::identity(n, n);
        for j in 1..n {
            c[(j, j - 1)] = -1.0;
        }
        c[(0, n - 1)] -= self.alpha;
        c
    }

    /// Unitary Fourier matrix with entries `omega^{jk} / sqrt(N)`.
    pub fn fourier(&self) -> DMatrix<Complex64> {
        let n = self.n;
        let s = 1.0 / (n as f64).sqrt();
        DMatrix::from_fn(n, n, |j, k| {
            let theta = 2.0 * std::f64::consts::PI * ((j * k) % n) as f64 / n as f64;
            Complex64::from_polar(s, theta)
        })
    }

    /// Eigenvector matrix `V = D^{-1} F`.
    pub fn v(&self) -> DMatrix<Complex64> {
        let mut v = self.fourier();
        for j in 0..self.n {
            v.row_mut(j).scale_mut(1.0 / self.scaling[j]);
        }
        v
    }

    /// `V^{-1} = F^* D`.
    pub fn v_inverse(&self) -> DMatrix<Complex64> {
        let mut w = self.fourier().adjoint();
        for j in 0..self.n {
            w.column_mut(j).scale_mut(self.scaling[j]);
        }
        w
    }

    /// `||C_alpha - V diag(lambda) V^{-1}||_inf` (max absolute row sum).
    pub fn eigen_residual(&self) -> f64 {
        let lam = DMatrix::from_diagonal(&DVector::from_vec(self.eigenvalues.clone()));
        let rebuilt = self.v() * lam * self.v_inverse();
        let diff = self.c_alpha().map(|x| Complex64::new(x, 0.0)) - rebuilt;
        diff.row_iter()
            .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Closed-form spectral condition number `alpha^{-(N-1)/N}` of `V`.
    pub fn condition_number(&self) -> f64 {
        self.alpha.powf(-((self.n - 1) as f64) / self.n as f64)
    }
}

fn dft_blocks(blocks: &[DVector<Complex64>], direction: FftDirection) -> Vec<DVector<Complex64>> {
    let n = blocks.len();
    if n == 0 {
        return Vec::new();
    }
    let nx = blocks[0].len();
    let fft = FftPlanner::new().plan_fft(n, direction);
    let scale = 1.0 / (n as f64).sqrt();
    let mut out = vec![DVector::zeros(nx); n];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..nx {
        for (b, block) in buf.iter_mut().zip(blocks) {
            *b = block[i];
        }
        fft.process(&mut buf);
        for (o, b) in out.iter_mut().zip(&buf) {
            o[i] = b * scale;
        }
    }
    out
}

/// `(F (x) I) v`: block `j` of the result is `sum_k omega^{jk} v_k / sqrt(N)`.
pub fn forward_dft(blocks: &[DVector<Complex64>]) -> Vec<DVector<Complex64>> {
    // rustfft's inverse direction carries the positive exponent
    dft_blocks(blocks, FftDirection::Inverse)
}

/// `(F^* (x) I) v`, the inverse of [`forward_dft`].
pub fn inverse_dft(blocks: &[DVector<Complex64>]) -> Vec<DVector<Complex64>> {
    dft_blocks(blocks, FftDirection::Forward)
}

/// Factorized shifted systems `lambda_k I - dT J` for a fixed mean Jacobian.
#[derive(Debug, Clone)]
pub struct ShiftedSystems {
    spec: AlphaCirculantSpec,
    factors: Vec<BandedLu<Complex64>>,
}

impl ShiftedSystems {
    pub fn new(spec: &AlphaCirculantSpec, mean_jac: &Banded<f64>, delta_t: f64) -> Result<Self> {
        let base = mean_jac.to_complex().scaled(Complex64::new(-delta_t, 0.0));
        let factors = spec
            .eigenvalues
            .par_iter()
            .enumerate()
            .map(|(index, &lam)| {
                base.scale_shift(Complex64::new(1.0, 0.0), lam)
                    .lu()
                    .map_err(|_| SolverError::SingularShift { index })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            spec: spec.clone(),
            factors,
        })
    }

    pub fn solve(&self, r: &[StateVector]) -> Result<Vec<StateVector>> {
        Ok(self.solve_with_leakage(r)?.0)
    }

    /// Solution and the largest imaginary part discarded after the back transform.
    pub fn solve_with_leakage(&self, r: &[StateVector]) -> Result<(Vec<StateVector>, f64)> {
        let spec = &self.spec;
        if r.len() != spec.n {
            return Err(SolverError::DimensionMismatch {
                expected: spec.n,
                got: r.len(),
            });
        }
        let nx = self.factors[0].dim();
        if let Some(bad) = r.iter().find(|b| b.len() != nx) {
            return Err(SolverError::DimensionMismatch {
                expected: nx,
                got: bad.len(),
            });
        }
        // (a) p = (F^* D (x) I) r
        let scaled: Vec<DVector<Complex64>> = r
            .iter()
            .zip(&spec.scaling)
            .map(|(b, &s)| b.map(|x| Complex64::new(x * s, 0.0)))
            .collect();
        let mut p = inverse_dft(&scaled);
        // (b) independent shifted solves
        p.par_iter_mut()
            .zip(&self.factors)
            .for_each(|(pk, lu)| lu.solve_in_place(pk.as_mut_slice()));
        // (c) u = (D^{-1} F (x) I) q
        let q = forward_dft(&p);
        let mut leak = 0.0_f64;
        let out = q
            .iter()
            .zip(&spec.scaling)
            .map(|(b, &s)| {
                leak = leak.max(b.iter().fold(0.0_f64, |m, z| m.max(z.im.abs())) / s);
                b.map(|z| z.re / s)
            })
            .collect();
        Ok((out, leak))
    }
}

/// Solve `(C_alpha (x) I - dT I (x) J) u = r` in three steps.
pub fn three_step_solve(
    spec: &AlphaCirculantSpec,
    mean_jac: &Banded<f64>,
    delta_t: f64,
    r: &[StateVector],
) -> Result<Vec<StateVector>> {
    ShiftedSystems::new(spec, mean_jac, delta_t)?.solve(r)
}

/// Coarse correction operator for one sample; factorizations are reused across
/// outer iterations for affine models.
#[derive(Debug, Clone)]
pub struct CoarseCorrector<'a> {
    props: Propagators<'a>,
    spec: AlphaCirculantSpec,
    cfg: SolverConfig,
    linear: Option<LinearCoarse>,
}

#[derive(Debug, Clone)]
struct LinearCoarse {
    a: Banded<f64>,
    sources: Vec<StateVector>,
    systems: ShiftedSystems,
}

impl<'a> CoarseCorrector<'a> {
    pub fn new(model: &'a ModelSpec, xi: &'a ParameterSample, grid: &'a TimeGrid, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let props = Propagators::new(model, xi, grid, cfg)?;
        let spec = build_alpha_circulant(grid.n_coarse, cfg.alpha)?;
        let linear = if model.is_linear() {
            let a = model.linear_operator(xi)?;
            let sources = (1..=grid.n_coarse)
                .map(|n| model.source(grid.coarse_point(n), xi))
                .collect::<Result<_>>()?;
            let systems = ShiftedSystems::new(&spec, &a.scaled(-1.0), grid.coarse_step)?;
            Some(LinearCoarse { a, sources, systems })
        } else {
            None
        };
        Ok(Self {
            props,
            spec,
            cfg: cfg.clone(),
            linear,
        })
    }

    pub fn propagators(&self) -> &Propagators<'a> {
        &self.props
    }

    /// Block right-hand side `b_n = F_n - G(U_{n-1})`, with `alpha U_N` feeding the first block.
    pub fn right_hand_side(&self, prev: &CoarseTrajectory, fine_ends: &[StateVector]) -> Result<Vec<StateVector>> {
        let n_coarse = self.props.grid.n_coarse;
        if fine_ends.len() != n_coarse || prev.len() != n_coarse {
            return Err(SolverError::DimensionMismatch {
                expected: n_coarse,
                got: fine_ends.len().min(prev.len()),
            });
        }
        let alpha = self.spec.alpha;
        (0..n_coarse)
            .into_par_iter()
            .map(|n| {
                let g = if n == 0 {
                    self.props.coarse(&(&prev.states[n_coarse - 1] * alpha), 0)?
                } else {
                    self.props.coarse(&prev.states[n - 1], n)?
                };
                Ok(&fine_ends[n] - g)
            })
            .collect()
    }

    /// `U^{k+1}` from `U^k` and the fine end values of iteration `k`.
    pub fn correct(&self, prev: &CoarseTrajectory, fine_ends: &[StateVector]) -> Result<CoarseTrajectory> {
        let b = self.right_hand_side(prev, fine_ends)?;
        let dt = self.props.grid.coarse_step;
        let states = match &self.linear {
            Some(lin) => {
                let r: Vec<StateVector> = b
                    .iter()
                    .zip(&lin.sources)
                    .map(|(bn, g)| bn + (lin.a.mul_vec(bn) + g) * dt)
                    .collect();
                lin.systems.solve(&r)?
            }
            None => self.simplified_newton(&b, prev.states.clone())?,
        };
        Ok(CoarseTrajectory::new(prev.initial.clone(), states))
    }

    // Solves U_n - U_{n-1} - dT f(U_n - b_n, T_n) = b_n with the mean Jacobian.
    fn simplified_newton(&self, b: &[StateVector], mut u: Vec<StateVector>) -> Result<Vec<StateVector>> {
        let model = self.props.model;
        let xi = self.props.xi;
        let grid = self.props.grid;
        let dt = grid.coarse_step;
        let n_coarse = grid.n_coarse;
        let mut increment = f64::INFINITY;
        for _ in 0..self.cfg.max_coupled_newton_iters {
            let evals = (0..n_coarse)
                .into_par_iter()
                .map(|n| model.evaluate(&(&u[n] - &b[n]), grid.coarse_point(n + 1), xi))
                .collect::<Result<Vec<_>>>()?;
            let mut mean = evals[0].jacobian.clone();
            for e in &evals[1..] {
                mean = mean.add(&e.jacobian);
            }
            let mean = mean.scaled(1.0 / n_coarse as f64);
            let r: Vec<StateVector> = (0..n_coarse)
                .map(|n| &b[n] + (&evals[n].value - mean.mul_vec(&u[n])) * dt)
                .collect();
            let next = three_step_solve(&self.spec, &mean, dt, &r)?;
            increment = next
                .iter()
                .zip(&u)
                .map(|(a, b)| inf_dist(a, b))
                .fold(0.0, f64::max);
            u = next;
            if increment <= self.cfg.newton_tol {
                return Ok(u);
            }
        }
        Err(SolverError::CoupledNonConvergence {
            iters: self.cfg.max_coupled_newton_iters,
            increment,
            last: u,
        })
    }
}

/// One diagonalized coarse-grid correction.
pub fn cgc_correct(
    model: &ModelSpec,
    xi: &ParameterSample,
    grid: &TimeGrid,
    cfg: &SolverConfig,
    prev: &CoarseTrajectory,
    fine_ends: &[StateVector],
) -> Result<CoarseTrajectory> {
    CoarseCorrector::new(model, xi, grid, cfg)?.correct(prev, fine_ends)
}

/// Parareal with the diagonalized coarse-grid correction.
pub fn pcgc_solve(
    model: &ModelSpec,
    xi: &ParameterSample,
    grid: &TimeGrid,
    cfg: &SolverConfig,
    init: &CoarseTrajectory,
    opts: SolveOptions<'_>,
) -> Result<IterationTrace> {
    check_init(model, grid, init)?;
    let corrector = CoarseCorrector::new(model, xi, grid, cfg)?;
    let mut trace = TraceBuilder::new(cfg, opts);
    let mut current = init.clone();
    if let Some(t) = trace.push(0, &current, None)? {
        return Ok(t);
    }
    for k in 1.. {
        let fine = fine_sweeps(corrector.propagators(), &current)?;
        let next = match corrector.correct(&current, &fine) {
            Ok(t) => t,
            // an inexact coarse solve only slows the outer iteration; its fixed point is unchanged
            Err(SolverError::CoupledNonConvergence { iters, increment, last })
                if last.iter().all(|s| s.iter().all(|x| x.is_finite())) =>
            {
                log::warn!("outer iteration {k}: coupled coarse solve stopped after {iters} steps at increment {increment:e}");
                CoarseTrajectory::new(current.initial.clone(), last)
            }
            Err(e) => return Err(e),
        };
        if let Some(t) = trace.push(k, &next, Some(&current))? {
            return Ok(t);
        }
        current = next;
    }
    unreachable!("outer loop exits through the trace")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_block() {
        let s = build_alpha_circulant(1, 0.5).unwrap();
        assert!((s.eigenvalues[0] - Complex64::new(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn two_by_two_eigenvalues() {
        let s = build_alpha_circulant(2, 0.25).unwrap();
        let mut re: Vec<f64> = s.eigenvalues.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        assert!((re[0] - 0.5).abs() < 1e-15 && (re[1] - 1.5).abs() < 1e-15);
        assert!(s.eigenvalues.iter().all(|z| z.im.abs() < 1e-15));
    }

    #[test]
    fn product_is_determinant() {
        let s = build_alpha_circulant(4, 0.1).unwrap();
        let p = s.eigenvalues.iter().fold(Complex64::new(1.0, 0.0), |acc, z| acc * z);
        assert!((p - Complex64::new(0.9, 0.0)).norm() < 1e-12);
        assert!((s.c_alpha().determinant() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_alpha() {
        assert!(build_alpha_circulant(4, 0.0).is_err());
        assert!(build_alpha_circulant(4, 1.0).is_err());
        assert!(build_alpha_circulant(0, 0.5).is_err());
    }

    #[test]
    fn residual_small() {
        for n in [2, 4, 8, 16, 32] {
            for alpha in [0.05, 0.1, 0.5] {
                let s = build_alpha_circulant(n, alpha).unwrap();
                assert!(s.eigen_residual() <= 1e-12, "n={n} alpha={alpha}");
            }
        }
    }

    #[test]
    fn dft_single_block_identity() {
        let v = vec![DVector::from_vec(vec![Complex64::new(1.0, 2.0), Complex64::new(-3.0, 0.5)])];
        assert_eq!(forward_dft(&v), v);
        assert_eq!(inverse_dft(&v), v);
    }

    #[test]
    fn scalar_two_block_solve() {
        let s = build_alpha_circulant(2, 0.5).unwrap();
        let zero = Banded::zeros(1, 0, 0);
        let r = vec![DVector::from_element(1, 1.0), DVector::from_element(1, 0.0)];
        let u = three_step_solve(&s, &zero, 1.0, &r).unwrap();
        assert!((u[0][0] - 2.0).abs() < 1e-13 && (u[1][0] - 2.0).abs() < 1e-13);
    }

    #[test]
    fn zero_rhs_zero_solution() {
        let s = build_alpha_circulant(5, 0.1).unwrap();
        let jac = crate::models::laplacian_1d(6, 1.0 / 7.0);
        let r = vec![DVector::zeros(6); 5];
        let u = three_step_solve(&s, &jac, 0.1, &r).unwrap();
        assert!(u.iter().all(|b| b.iter().all(|&x| x == 0.0)));
    }
}
