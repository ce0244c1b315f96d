//! Small dense helpers shared by the filters and their test oracles.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// `a* b` for slices.
#[inline]
pub fn dotc(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).fold(ZERO, |acc, (x, y)| acc + x.conj() * y)
}

#[inline]
pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum()
}

/// Frobenius norm of `a - b`.
pub fn frob_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm()
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn is_upper_triangular(a: &CMatrix, tol: f64) -> bool {
    let n = a.nrows();
    (0..n).all(|j| (j + 1..n).all(|i| a[(i, j)].norm() <= tol))
}

/// Upper-triangular factor `R` with positive diagonal such that `P = R R*`.
///
/// Computed from the ordinary Cholesky factor of `J P J` where `J` reverses
/// the index order.
pub fn upper_cholesky(p: &CMatrix) -> Result<CMatrix> {
    let n = p.nrows();
    if p.ncols() != n {
        return Err(Error::Dimension(format!("expected a square matrix, got {}x{}", n, p.ncols())));
    }
    let flipped = CMatrix::from_fn(n, n, |i, j| p[(n - 1 - i, n - 1 - j)]);
    let chol = Cholesky::new(flipped).ok_or(Error::NotPositiveDefinite { what: "covariance" })?;
    let mut l = chol.l();
    // complex sqrt never fails, so indefiniteness shows up as a non-positive pivot
    for i in 0..n {
        let d = l[(i, i)];
        if !(d.re > 0.0 && d.im.abs() <= 1e-8 * d.re) {
            return Err(Error::NotPositiveDefinite { what: "covariance" });
        }
        l[(i, i)] = real(d.re);
    }
    Ok(CMatrix::from_fn(n, n, |i, j| l[(n - 1 - i, n - 1 - j)]))
}

/// Eigendecomposition of a Hermitian matrix; eigenvalues are real and the
/// eigenvector matrix unitary.
pub fn hermitian_eig(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = h.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    // symmetrize against roundoff before handing over the lower triangle
    let sym = CMatrix::from_fn(n, n, |i, j| (h[(i, j)] + h[(j, i)].conj()) * 0.5);
    let eig = sym.symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// Eigenvalues of a general complex square matrix. Triangular inputs are
/// read off the diagonal.
pub fn eigenvalues(a: &CMatrix) -> Result<Vec<C64>> {
    let n = a.nrows();
    if is_upper_triangular(a, 0.0) {
        return Ok((0..n).map(|i| a[(i, i)]).collect());
    }
    let schur = a
        .clone()
        .try_schur(f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Validation("Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    Ok((0..n).map(|i| t[(i, i)]).collect())
}

pub fn spectral_radius(a: &CMatrix) -> Result<f64> {
    Ok(eigenvalues(a)?.iter().map(|l| l.norm()).fold(0.0, f64::max))
}

/// 2-norm condition number from the singular values.
pub fn condition_number(a: &CMatrix) -> f64 {
    let sv = a.clone().singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solve `R x = v` for upper-triangular `R`.
pub fn solve_upper(r: &CMatrix, v: &CVector) -> Result<CVector> {
    r.solve_upper_triangular(v)
        .ok_or(Error::NotPositiveDefinite { what: "triangular factor" })
}
