//! Banded matrices and banded LU with partial pivoting, for real and complex entries.
//!
//! Every implicit step in this crate solves a system whose bandwidth is known from the
//! spatial stencil (tridiagonal in 1D, `m - 1` off-diagonals for the 2D five-point stencil),
//! so a band factorization costs `O(n * kl * (kl + ku))`.

use std::fmt::Debug;
use std::ops::Neg;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use num_traits::NumAssign;

use crate::error::{Result, SolverError};

/// Entry type of a band matrix.
pub trait BandScalar: NumAssign + Neg<Output = Self> + Copy + Send + Sync + Debug + 'static {
    fn magnitude(self) -> f64;
    fn from_real(x: f64) -> Self;
}

impl BandScalar for f64 {
    fn magnitude(self) -> f64 {
        self.abs()
    }
    fn from_real(x: f64) -> Self {
        x
    }
}

impl BandScalar for Complex64 {
    fn magnitude(self) -> f64 {
        self.norm()
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
}

/// Square matrix with `kl` sub- and `ku` super-diagonals, stored row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct Banded<T> {
    n: usize,
    kl: usize,
    ku: usize,
    // row i, column j lives at i * (kl + ku + 1) + (j + kl - i)
    data: Vec<T>,
}

impl<T: BandScalar> Banded<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self {
            n,
            kl,
            ku,
            data: vec![T::zero(); n * (kl + ku + 1)],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, 0, 0);
        for i in 0..n {
            m.set(i, i, T::one());
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        if i < self.n && j < self.n && self.in_band(i, j) {
            self.data[i * self.width() + (j + self.kl - i)]
        } else {
            T::zero()
        }
    }

    /// Panics if `(i, j)` is outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        assert!(i < self.n && j < self.n && self.in_band(i, j), "({i}, {j}) outside band");
        let w = self.width();
        self.data[i * w + (j + self.kl - i)] = v;
    }

    pub fn add_to(&mut self, i: usize, j: usize, v: T) {
        let cur = self.get(i, j);
        self.set(i, j, cur + v);
    }

    /// Iterate the stored entries `(i, j, a_ij)` of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let lo = i.saturating_sub(self.kl);
        let hi = (i + self.ku).min(self.n - 1);
        (lo..=hi).map(move |j| (j, self.data[i * self.width() + (j + self.kl - i)]))
    }

    /// `alpha * self + beta * I`.
    pub fn scale_shift(&self, alpha: T, beta: T) -> Self {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v *= alpha;
        }
        for i in 0..self.n {
            out.add_to(i, i, beta);
        }
        out
    }

    /// Elementwise `self + other` with the union bandwidth.
    pub fn add(&self, other: &Banded<T>) -> Self {
        assert_eq!(self.n, other.n);
        let mut out = Self::zeros(self.n, self.kl.max(other.kl), self.ku.max(other.ku));
        for m in [self, other] {
            for i in 0..m.n {
                for (j, v) in m.row(i) {
                    out.add_to(i, j, v);
                }
            }
        }
        out
    }

    pub fn scaled(&self, s: T) -> Self {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v *= s;
        }
        out
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                let mut acc = T::zero();
                for (j, a) in self.row(i) {
                    acc += a * x[j];
                }
                acc
            })
            .collect()
    }

    /// LU factorization with partial (row) pivoting.
    pub fn lu(&self) -> Result<BandedLu<T>> {
        BandedLu::factor(self)
    }

    /// Entrywise max-magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.magnitude()))
    }
}

impl Banded<f64> {
    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(self.matvec(x.as_slice()))
    }

    /// Real band matrix promoted to complex entries.
    pub fn to_complex(&self) -> Banded<Complex64> {
        Banded {
            n: self.n,
            kl: self.kl,
            ku: self.ku,
            data: self.data.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        }
    }
}

/// Band LU factors `P A = L U`. `U` carries `kl + ku` super-diagonals after fill-in.
#[derive(Debug, Clone)]
pub struct BandedLu<T> {
    n: usize,
    kl: usize,
    // fill-in width of U
    ku_fill: usize,
    // row i holds columns i - kl ..= i + ku_fill
    data: Vec<T>,
    pivots: Vec<usize>,
}

impl<T: BandScalar> BandedLu<T> {
    fn width(&self) -> usize {
        self.kl + self.ku_fill + 1
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width() + (j + self.kl - i)
    }

    fn factor(a: &Banded<T>) -> Result<Self> {
        let n = a.n;
        let kl = a.kl;
        let ku_fill = a.kl + a.ku;
        let mut lu = BandedLu {
            n,
            kl,
            ku_fill,
            data: vec![T::zero(); n * (2 * kl + a.ku + 1)],
            pivots: vec![0; n],
        };
        for i in 0..n {
            for (j, v) in a.row(i) {
                let k = lu.idx(i, j);
                lu.data[k] = v;
            }
        }
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = lu.data[lu.idx(k, k)].magnitude();
            for i in k + 1..=last_row {
                let m = lu.data[lu.idx(i, k)].magnitude();
                if m > best {
                    best = m;
                    p = i;
                }
            }
            if best <= scale * f64::EPSILON * 1e-3 || !best.is_finite() {
                return Err(SolverError::Singular { row: k });
            }
            lu.pivots[k] = p;
            let last_col = (k + ku_fill).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let (a_idx, b_idx) = (lu.idx(k, j), lu.idx(p, j));
                    lu.data.swap(a_idx, b_idx);
                }
            }
            let pivot = lu.data[lu.idx(k, k)];
            for i in k + 1..=last_row {
                let ik = lu.idx(i, k);
                let l = lu.data[ik] / pivot;
                lu.data[ik] = l;
                if l == T::zero() {
                    continue;
                }
                for j in k + 1..=last_col {
                    let kj = lu.data[lu.idx(k, j)];
                    let ij = lu.idx(i, j);
                    lu.data[ij] -= l * kj;
                }
            }
        }
        Ok(lu)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solve `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [T]) {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk == T::zero() {
                continue;
            }
            for i in k + 1..=(k + self.kl).min(n - 1) {
                b[i] -= self.data[self.idx(i, k)] * bk;
            }
        }
        for k in (0..n).rev() {
            let mut acc = b[k];
            for j in k + 1..=(k + self.ku_fill).min(n - 1) {
                acc -= self.data[self.idx(k, j)] * b[j];
            }
            b[k] = acc / self.data[self.idx(k, k)];
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

impl BandedLu<f64> {
    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(self.solve(b.as_slice()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_banded(n: usize, kl: usize, ku: usize, vals: &[f64]) -> Banded<f64> {
        let mut a = Banded::zeros(n, kl, ku);
        let mut it = vals.iter().cycle();
        for i in 0..n {
            let lo = i.saturating_sub(kl);
            let hi = (i + ku).min(n - 1);
            for j in lo..=hi {
                a.set(i, j, *it.next().unwrap());
            }
        }
        a
    }

    #[test]
    fn identity_solve() {
        let lu = Banded::<f64>::identity(4).lu().unwrap();
        assert_eq!(lu.solve(&[1.0, 2.0, 3.0, 4.0]), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn needs_pivoting() {
        // zero leading diagonal forces a row swap
        let mut a = Banded::zeros(3, 1, 1);
        a.set(0, 0, 0.0);
        a.set(0, 1, 1.0);
        a.set(1, 0, 2.0);
        a.set(1, 1, 1.0);
        a.set(1, 2, 1.0);
        a.set(2, 1, 1.0);
        a.set(2, 2, 3.0);
        let x = [1.0, -2.0, 0.5];
        let b = a.matvec(&x);
        let got = a.lu().unwrap().solve(&b);
        for (g, e) in got.iter().zip(x) {
            assert!((g - e).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_detected() {
        let a = Banded::<f64>::zeros(3, 1, 1);
        assert!(matches!(a.lu(), Err(SolverError::Singular { .. })));
    }

    #[test]
    fn complex_shifted_solve() {
        let mut a = Banded::<f64>::zeros(5, 1, 1);
        for i in 0..5 {
            a.set(i, i, 2.0);
            if i > 0 {
                a.set(i, i - 1, -1.0);
                a.set(i - 1, i, -1.0);
            }
        }
        let shift = Complex64::new(0.3, -0.7);
        let m = a.to_complex().scale_shift(Complex64::new(1.0, 0.0), shift);
        let x: Vec<Complex64> = (0..5).map(|k| Complex64::new(k as f64, 1.0 - k as f64)).collect();
        let b = m.matvec(&x);
        let got = m.lu().unwrap().solve(&b);
        for (g, e) in got.iter().zip(&x) {
            assert!((g - e).norm() < 1e-13);
        }
    }

    proptest! {
        #[test]
        fn banded_lu_matches_dense(
            n in 1usize..12,
            kl in 0usize..4,
            ku in 0usize..4,
            vals in prop::collection::vec(-1.0f64..1.0, 64),
            rhs in prop::collection::vec(-1.0f64..1.0, 12),
        ) {
            let mut a = random_banded(n, kl, ku, &vals);
            // keep the instance comfortably nonsingular
            for i in 0..n {
                a.add_to(i, i, 4.0 * if i % 2 == 0 { 1.0 } else { -1.0 });
            }
            let b = DVector::from_column_slice(&rhs[..n]);
            let dense = a.to_dense().lu().solve(&b).unwrap();
            let got = a.lu().unwrap().solve_vec(&b);
            prop_assert!((dense - got).amax() < 1e-12);
        }
    }
}
