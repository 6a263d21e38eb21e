//! Total-order polynomial chaos bases and least-squares coefficient fits.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SolverError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PolyFamily {
    /// Orthonormal under the uniform probability measure on `[-1, 1]`.
    #[default]
    Legendre,
    /// Probabilists' Hermite, orthonormal under the standard Gaussian.
    Hermite,
}

/// Affine map of a support interval onto `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterMap {
    pub lo: f64,
    pub hi: f64,
}

impl ParameterMap {
    pub fn apply(&self, x: f64) -> f64 {
        2.0 * (x - self.lo) / (self.hi - self.lo) - 1.0
    }
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// `P = (p + N_p)! / (p! N_p!)`.
pub fn gpc_basis_count(p: usize, np: usize) -> usize {
    binomial(p + np, np)
}

/// Multi-indices with `|k|_1 <= p`, graded by total degree, lexicographically
/// descending within a degree (`1, x1, x2, x1^2, x1 x2, x2^2, ...`).
pub fn multi_indices(p: usize, np: usize) -> Vec<Vec<usize>> {
    fn fill(rest: usize, slots: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if slots == 1 {
            prefix.push(rest);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in (0..=rest).rev() {
            prefix.push(first);
            fill(rest - first, slots - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::with_capacity(gpc_basis_count(p, np));
    for d in 0..=p {
        fill(d, np, &mut Vec::with_capacity(np), &mut out);
    }
    out
}

/// Values of the orthonormal 1D polynomials of degree `0..=p` at `x`.
pub fn univariate(family: PolyFamily, p: usize, x: f64) -> Vec<f64> {
    let mut raw = Vec::with_capacity(p + 1);
    raw.push(1.0);
    if p >= 1 {
        raw.push(x);
    }
    for k in 1..p {
        let kf = k as f64;
        let next = match family {
            PolyFamily::Legendre => ((2.0 * kf + 1.0) * x * raw[k] - kf * raw[k - 1]) / (kf + 1.0),
            PolyFamily::Hermite => x * raw[k] - kf * raw[k - 1],
        };
        raw.push(next);
    }
    let mut fact = 1.0;
    raw.iter()
        .enumerate()
        .map(|(k, &v)| match family {
            PolyFamily::Legendre => v * (2.0 * k as f64 + 1.0).sqrt(),
            PolyFamily::Hermite => {
                if k > 0 {
                    fact *= k as f64;
                }
                v / fact.sqrt()
            }
        })
        .collect()
}

/// All `P` basis functions at a mapped point.
pub fn gpc_eval_basis(x: &[f64], p: usize, family: PolyFamily) -> Vec<f64> {
    let tables: Vec<Vec<f64>> = x.iter().map(|&xl| univariate(family, p, xl)).collect();
    multi_indices(p, x.len())
        .iter()
        .map(|k| k.iter().zip(&tables).map(|(&kl, t)| t[kl]).product())
        .collect()
}

/// Largest degree `p <= 6` with `P <= floor(n_t / 2)`; zero if even `P = 1` does not fit.
pub fn default_degree(nt: usize, np: usize) -> usize {
    (0..=6usize)
        .rev()
        .find(|&p| gpc_basis_count(p, np) <= nt / 2)
        .unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpcFit {
    pub degree: usize,
    pub family: PolyFamily,
    /// One coefficient vector `h` of length `P` per mode.
    pub coefficients: Vec<DVector<f64>>,
    /// `||B h - D||_2` per mode.
    pub residuals: Vec<f64>,
}

/// Design matrix `B_{jk} = psi_k(x_j)`.
pub fn design_matrix(points: &[Vec<f64>], p: usize, family: PolyFamily) -> DMatrix<f64> {
    let cols = gpc_basis_count(p, points.first().map_or(1, |x| x.len()));
    DMatrix::from_fn(points.len(), cols, |j, k| gpc_eval_basis(&points[j], p, family)[k])
}

/// Least-squares fit of every column of `zeta` (`n_t x M_Q`) at the mapped `points`.
///
/// The degree is lowered, with a warning, until `P <= n_t`.
pub fn gpc_fit(points: &[Vec<f64>], zeta: &DMatrix<f64>, p: usize, family: PolyFamily) -> Result<GpcFit> {
    let nt = points.len();
    if nt == 0 {
        return Err(SolverError::InvalidArgument("no training points".into()));
    }
    if zeta.nrows() != nt {
        return Err(SolverError::DimensionMismatch {
            expected: nt,
            got: zeta.nrows(),
        });
    }
    let np = points[0].len();
    let mut degree = p;
    while degree > 0 && gpc_basis_count(degree, np) > nt {
        degree -= 1;
    }
    if degree < p {
        log::warn!("{nt} training points cannot support degree {p}; using degree {degree}");
    }
    let b = design_matrix(points, degree, family);
    let cols = b.ncols();
    let qr = b.clone().qr();
    let r = qr.r();
    let diag_max = (0..cols).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let rank = (0..cols).filter(|&i| r[(i, i)].abs() > 1e-12 * diag_max).count();
    if rank < cols {
        return Err(SolverError::RankDeficient { rank, cols });
    }
    let q = qr.q();
    let mut coefficients = Vec::with_capacity(zeta.ncols());
    let mut residuals = Vec::with_capacity(zeta.ncols());
    for d in zeta.column_iter() {
        let rhs = q.tr_mul(&d);
        let h = r
            .solve_upper_triangular(&rhs)
            .ok_or(SolverError::RankDeficient { rank, cols })?;
        residuals.push((&b * &h - d).norm());
        coefficients.push(h);
    }
    Ok(GpcFit {
        degree,
        family,
        coefficients,
        residuals,
    })
}
