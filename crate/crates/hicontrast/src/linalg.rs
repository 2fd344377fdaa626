//! Dense complex linear algebra on top of faer.

use faer::linalg::solvers::{DenseSolveCore, PartialPivLu, Solve};
use num_complex::Complex64;

pub type CMat = faer::Mat<Complex64>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("eigensolver failed to converge")]
    Eigen,
    #[error("singular value decomposition failed to converge")]
    Svd,
    #[error("matrix is numerically singular (pivot ratio {0:e})")]
    Singular(f64),
}

/// LU factorisation with partial pivoting, reusable across right-hand sides.
pub struct Lu {
    inner: PartialPivLu<Complex64>,
    pivot_ratio: f64,
}

impl Lu {
    pub fn new(a: &CMat) -> Lu {
        let inner = a.partial_piv_lu();
        let u = inner.U();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..u.nrows() {
            let d = u[(i, i)].norm();
            lo = lo.min(d);
            hi = hi.max(d);
        }
        let pivot_ratio = if hi > 0.0 { lo / hi } else { 0.0 };
        Lu { inner, pivot_ratio }
    }

    /// Smallest over largest pivot magnitude; a cheap singularity indicator.
    pub fn pivot_ratio(&self) -> f64 {
        self.pivot_ratio
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let rhs = faer::Mat::from_fn(b.len(), 1, |i, _| b[i]);
        let x = self.inner.solve(&rhs);
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }

    pub fn solve_mat(&self, b: &CMat) -> CMat {
        self.inner.solve(b)
    }

    pub fn inverse(&self) -> CMat {
        self.inner.inverse()
    }
}

pub fn matvec(a: &CMat, x: &[Complex64]) -> Vec<Complex64> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)] * x[j]).sum())
        .collect()
}

pub fn norm2(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigenvalues and right eigenvectors (columns) of a general complex matrix.
pub fn eig(a: &CMat) -> Result<(Vec<Complex64>, CMat), LinalgError> {
    let e = a.eigen().map_err(|_| LinalgError::Eigen)?;
    let s = e.S();
    let vals = (0..a.nrows()).map(|i| s[i]).collect();
    Ok((vals, e.U().to_owned()))
}

/// Singular values in non-increasing order.
pub fn singular_values(a: &CMat) -> Result<Vec<f64>, LinalgError> {
    a.singular_values().map_err(|_| LinalgError::Svd)
}

pub fn frobenius(a: &CMat) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn lu_solves_small_system() {
        let a = faer::mat![[c(2.0, 1.0), c(1.0, 0.0)], [c(0.0, -1.0), c(3.0, 0.0)]];
        let lu = Lu::new(&a);
        let x = lu.solve(&[c(1.0, 0.0), c(0.0, 1.0)]);
        let r = matvec(&a, &x);
        assert!((r[0] - c(1.0, 0.0)).norm() < 1e-14);
        assert!((r[1] - c(0.0, 1.0)).norm() < 1e-14);
        assert!(lu.pivot_ratio() > 0.1);
    }

    #[test]
    fn eig_of_triangular() {
        let a = faer::mat![[c(1.0, 1.0), c(5.0, 0.0)], [c(0.0, 0.0), c(-2.0, 0.5)]];
        let (vals, vecs) = eig(&a).unwrap();
        for (k, l) in vals.iter().enumerate() {
            let v: Vec<_> = (0..2).map(|i| vecs[(i, k)]).collect();
            let av = matvec(&a, &v);
            for i in 0..2 {
                assert!((av[i] - l * v[i]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn svd_of_diagonal() {
        let a = faer::mat![[c(3.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, -4.0)]];
        let s = singular_values(&a).unwrap();
        assert!((s[0] - 4.0).abs() < 1e-14 && (s[1] - 3.0).abs() < 1e-14);
        assert!((frobenius(&a) - 5.0).abs() < 1e-14);
    }
}
