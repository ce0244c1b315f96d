//! Innovations-form state-space models.
//!
//! A model `(A, b, c)` of order `n` generates measurements through
//!
//! ```text
//! z[t+1] = A z[t] + b e[t]
//! y[t]   = c* z[t] + e[t]
//! ```
//!
//! where `e` is the innovations sequence. This module holds the model type,
//! simulation, impulse responses, similarity transforms and the Stein
//! equation solvers that every other module is checked against.

use nalgebra::linalg::LU;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64};

/// Models with spectral radius above `1 - STABILITY_TOL` are rejected.
pub const STABILITY_TOL: f64 = 1e-10;
/// Margin below 1 that the series Stein solver insists on.
pub const STEIN_MARGIN: f64 = 1e-8;
/// Default bound on the condition number of a similarity transform.
pub const DEFAULT_MAX_COND: f64 = 1e12;

/// Single-input single-output innovations model `(A, b, c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    a: CMatrix,
    b: CVector,
    c: CVector,
}

impl StateSpaceModel {
    /// Validates shapes, finiteness, stability and nonsingularity of `A`.
    pub fn new(a: CMatrix, b: CVector, c: CVector) -> Result<Self> {
        let model = Self::from_parts_unchecked(a, b, c)?;
        let eigs = linalg::eigenvalues(&model.a)?;
        let radius = eigs.iter().map(|l| l.norm()).fold(0.0, f64::max);
        if radius >= 1.0 - STABILITY_TOL {
            return Err(Error::Unstable { radius, bound: 1.0 - STABILITY_TOL });
        }
        if let Some(index) = eigs.iter().position(|l| l.norm() == 0.0) {
            return Err(Error::Singular { index });
        }
        Ok(model)
    }

    /// Shape and finiteness checks only. Useful for degenerate test systems
    /// (for instance `A = 0`) that the filters still have to cope with.
    pub fn from_parts_unchecked(a: CMatrix, b: CVector, c: CVector) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::Dimension(format!("A must be square and nonempty, got {}x{}", n, a.ncols())));
        }
        if b.len() != n || c.len() != n {
            return Err(Error::Dimension(format!(
                "b and c must have length {n}, got {} and {}",
                b.len(),
                c.len()
            )));
        }
        let finite = |x: &C64| x.re.is_finite() && x.im.is_finite();
        if !(a.iter().all(finite) && b.iter().all(finite) && c.iter().all(finite)) {
            return Err(Error::Validation("model entries must be finite".into()));
        }
        Ok(Self { a, b, c })
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &CMatrix {
        &self.a
    }

    pub fn b(&self) -> &CVector {
        &self.b
    }

    pub fn c(&self) -> &CVector {
        &self.c
    }

    pub fn with_c(mut self, c: CVector) -> Result<Self> {
        if c.len() != self.order() {
            return Err(Error::Dimension(format!("c must have length {}", self.order())));
        }
        self.c = c;
        Ok(self)
    }
}

/// Measurement sequence `y[1..=T]`, optionally with the innovations that
/// produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    samples: Vec<C64>,
    innovations: Option<Vec<C64>>,
}

impl TimeSeries {
    pub fn new(samples: Vec<C64>) -> Result<Self> {
        Self::with_innovations(samples, None)
    }

    pub fn with_innovations(samples: Vec<C64>, innovations: Option<Vec<C64>>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Validation("time series must be nonempty".into()));
        }
        if samples.iter().any(|y| !(y.re.is_finite() && y.im.is_finite())) {
            return Err(Error::Validation("time series contains non-finite values".into()));
        }
        if let Some(e) = &innovations {
            if e.len() != samples.len() {
                return Err(Error::Dimension("innovations length differs from samples".into()));
            }
        }
        Ok(Self { samples, innovations })
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn innovations(&self) -> Option<&[C64]> {
        self.innovations.as_deref()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// True when every sample has zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.samples.iter().all(|y| y.im == 0.0)
    }
}

/// `h[j] = c* A^j b` for `j = 0..lags`.
pub fn impulse_response(model: &StateSpaceModel, lags: usize) -> Vec<C64> {
    let mut v = model.b.clone();
    let mut out = Vec::with_capacity(lags);
    for _ in 0..lags {
        out.push(model.c.dotc(&v));
        v = &model.a * v;
    }
    out
}

/// Runs the innovations recursion. `z1` defaults to zero (prewindowed).
///
/// Returns the measurements (carrying the innovations) and the states
/// `z[1..=T]`.
pub fn simulate(
    model: &StateSpaceModel,
    innovations: &[C64],
    z1: Option<&CVector>,
) -> Result<(TimeSeries, Vec<CVector>)> {
    if innovations.is_empty() {
        return Err(Error::Validation("need at least one innovation".into()));
    }
    let n = model.order();
    let mut z = match z1 {
        Some(z) if z.len() != n => return Err(Error::Dimension(format!("z1 must have length {n}"))),
        Some(z) => z.clone(),
        None => CVector::zeros(n),
    };
    let mut ys = Vec::with_capacity(innovations.len());
    let mut states = Vec::with_capacity(innovations.len());
    for &e in innovations {
        ys.push(model.c.dotc(&z) + e);
        let next = &model.a * &z + &model.b * e;
        states.push(std::mem::replace(&mut z, next));
    }
    Ok((TimeSeries::with_innovations(ys, Some(innovations.to_vec()))?, states))
}

/// Solves `P - A P A* = sigma2 b b*` by summing `sigma2 A^k b b* A*^k`.
///
/// The sum stops once `sigma2 |A^k b|^2 / (1 - rho^2) <= tol`, `rho` being the
/// spectral radius of `A`.
pub fn solve_stein(a: &CMatrix, b: &CVector, sigma2: f64, tol: f64) -> Result<CMatrix> {
    check_square(a, b)?;
    if !(sigma2 > 0.0 && tol > 0.0) {
        return Err(Error::Validation("sigma2 and tol must be positive".into()));
    }
    let rho = linalg::spectral_radius(a)?;
    if rho >= 1.0 - STEIN_MARGIN {
        return Err(Error::Unstable { radius: rho, bound: 1.0 - STEIN_MARGIN });
    }
    let n = a.nrows();
    let tail = 1.0 / (1.0 - rho * rho);
    let mut p = CMatrix::zeros(n, n);
    let mut v = b.clone();
    let mut k = 0usize;
    loop {
        p.gerc(linalg::real(sigma2), &v, &v, linalg::ONE);
        v = a * v;
        k += 1;
        if k >= n && sigma2 * v.norm_squared() * tail <= tol {
            break;
        }
        if k > 50_000_000 / (n * n).max(1) + 10 * n {
            return Err(Error::Unstable { radius: rho, bound: 1.0 - STEIN_MARGIN });
        }
    }
    Ok(hermitian_part(&p))
}

/// Solves the Stein equation through the vectorized `n^2 x n^2` linear system.
/// Intended for small `n`; serves as the independent route for [`solve_stein`].
pub fn solve_stein_direct(a: &CMatrix, b: &CVector, sigma2: f64) -> Result<CMatrix> {
    check_square(a, b)?;
    let n = a.nrows();
    // vec(A P A*) = (conj(A) kron A) vec(P) for column-major vec
    let kron = a.map(|x| x.conj()).kronecker(a);
    let system = CMatrix::identity(n * n, n * n) - kron;
    let rhs = (b * b.adjoint()) * linalg::real(sigma2);
    let rhs = CVector::from_column_slice(rhs.as_slice());
    let sol = LU::new(system)
        .solve(&rhs)
        .ok_or(Error::IllConditioned { what: "Stein operator", cond: f64::INFINITY, bound: 0.0 })?;
    Ok(hermitian_part(&CMatrix::from_column_slice(n, n, sol.as_slice())))
}

/// `(T A T^-1, T b, T^-* c)` with the default conditioning bound.
pub fn apply_similarity(model: &StateSpaceModel, t: &CMatrix) -> Result<StateSpaceModel> {
    apply_similarity_with_bound(model, t, DEFAULT_MAX_COND)
}

pub fn apply_similarity_with_bound(model: &StateSpaceModel, t: &CMatrix, max_cond: f64) -> Result<StateSpaceModel> {
    let n = model.order();
    if t.nrows() != n || t.ncols() != n {
        return Err(Error::Dimension(format!("transform must be {n}x{n}")));
    }
    let cond = linalg::condition_number(t);
    if !(cond <= max_cond) {
        return Err(Error::IllConditioned { what: "similarity transform", cond, bound: max_cond });
    }
    let lu = LU::new(t.clone());
    let t_inv = lu
        .try_inverse()
        .ok_or(Error::IllConditioned { what: "similarity transform", cond, bound: max_cond })?;
    let a = t * &model.a * &t_inv;
    let b = t * &model.b;
    let c = t_inv.adjoint() * &model.c;
    StateSpaceModel::from_parts_unchecked(a, b, c)
}

fn check_square(a: &CMatrix, b: &CVector) -> Result<()> {
    if a.nrows() != a.ncols() || b.len() != a.nrows() {
        return Err(Error::Dimension(format!(
            "A is {}x{}, b has length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    Ok(())
}

pub(crate) fn hermitian_part(p: &CMatrix) -> CMatrix {
    let n = p.nrows();
    CMatrix::from_fn(n, n, |i, j| (p[(i, j)] + p[(j, i)].conj()) * 0.5)
}
