//! Dense pseudolinear regression, `O(n^2)` per step.
//!
//! The state estimate is driven by the estimated residuals,
//!
//! ```text
//! e[t]   = y[t] - c[t-1]* z[t]
//! P[t]   = delta P[t-1] + z[t] z[t]*
//! d[t]   = delta d[t-1] + z[t] y[t]*
//! c[t]   = P[t]^-1 d[t]
//! z[t+1] = A z[t] + b e[t]
//! ```
//!
//! and `c[t]` is updated through the matrix inversion lemma. This is the
//! reference the fast filter is checked against.

use nalgebra::Cholesky;
use nalgebra::linalg::LU;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64};

pub const DEFAULT_DELTA: f64 = 0.99;

#[derive(Debug, Clone)]
pub struct DensePlrState {
    t: usize,
    delta: f64,
    a: CMatrix,
    b: CVector,
    p_hat: CMatrix,
    phi: CMatrix,
    d: CVector,
    c_hat: CVector,
    z_hat: CVector,
    last_posterior: Option<C64>,
}

/// Prewindowed start (`z[1] = 0`) with `d[0] = P0 c0`.
pub fn plr_init(a: &CMatrix, b: &CVector, p0: &CMatrix, c0: &CVector, delta: f64) -> Result<DensePlrState> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n || p0.nrows() != n || p0.ncols() != n || c0.len() != n {
        return Err(Error::Dimension(format!("PLR expects order-{n} operands")));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Validation(format!("forgetting factor must lie in (0, 1], got {delta}")));
    }
    let p_hat = crate::model::hermitian_part(p0);
    let diagonal = (0..n).all(|j| (0..n).all(|i| i == j || p_hat[(i, j)] == linalg::ZERO));
    let phi = if diagonal {
        // common scaled-identity start; skip the O(n^3) inverse
        if (0..n).any(|i| !(p_hat[(i, i)].re > 0.0)) {
            return Err(Error::NotPositiveDefinite { what: "initial covariance" });
        }
        CMatrix::from_fn(n, n, |i, j| if i == j { p_hat[(i, i)].inv() } else { linalg::ZERO })
    } else {
        let chol = Cholesky::new(p_hat.clone()).ok_or(Error::NotPositiveDefinite { what: "initial covariance" })?;
        // nalgebra's complex Cholesky accepts indefinite input, so confirm through the pivots
        linalg::upper_cholesky(&p_hat)?;
        chol.inverse()
    };
    Ok(DensePlrState {
        t: 0,
        delta,
        a: a.clone(),
        b: b.clone(),
        d: &p_hat * c0,
        p_hat,
        phi,
        c_hat: c0.clone(),
        z_hat: CVector::zeros(n),
        last_posterior: None,
    })
}

impl DensePlrState {
    /// Replaces the prewindowed `z[1] = 0`. Only valid before the first step.
    pub fn with_initial_state(mut self, z1: CVector) -> Result<Self> {
        if self.t != 0 || z1.len() != self.z_hat.len() {
            return Err(Error::Validation("initial state must be set before stepping, with matching length".into()));
        }
        self.z_hat = z1;
        Ok(self)
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn order(&self) -> usize {
        self.b.len()
    }

    pub fn p_hat(&self) -> &CMatrix {
        &self.p_hat
    }

    pub fn phi(&self) -> &CMatrix {
        &self.phi
    }

    pub fn d(&self) -> &CVector {
        &self.d
    }

    pub fn c_hat(&self) -> &CVector {
        &self.c_hat
    }

    /// Regressor for the next step, `z[t+1]`.
    pub fn z_hat(&self) -> &CVector {
        &self.z_hat
    }

    pub fn a(&self) -> &CMatrix {
        &self.a
    }

    pub fn b(&self) -> &CVector {
        &self.b
    }

    /// A-posteriori residual `y[t] - c[t]* z[t]` of the last
    /// [`step_aposteriori`](Self::step_aposteriori) call.
    pub fn last_posterior_residual(&self) -> Option<C64> {
        self.last_posterior
    }

    /// Recursive update through the inversion lemma. Returns the prediction
    /// residual `e[t]`.
    ///
    /// The regressor is driven by the residuals, so the recursion can
    /// diverge; [`try_step`](Self::try_step) detects that, this does not.
    pub fn step(&mut self, y: C64) -> C64 {
        let z = &self.z_hat;
        let phi_z = &self.phi * z;
        let denom = self.delta + z.dotc(&phi_z).re;
        self.apply_step(y, phi_z, denom)
    }

    /// As [`step`](Self::step), refusing (and leaving the state untouched)
    /// when the gain denominator `delta + z* Phi z` is not a positive finite
    /// number, i.e. when `Phi` has lost definiteness or overflowed.
    pub fn try_step(&mut self, y: C64) -> Result<C64> {
        let z = &self.z_hat;
        let phi_z = &self.phi * z;
        let denom = self.delta + z.dotc(&phi_z).re;
        if !(denom > 0.0 && denom.is_finite()) {
            return Err(Error::NotPositiveDefinite { what: "gain denominator" });
        }
        Ok(self.apply_step(y, phi_z, denom))
    }

    fn apply_step(&mut self, y: C64, phi_z: CVector, denom: f64) -> C64 {
        let eps = y - self.c_hat.dotc(&self.z_hat);
        self.c_hat.axpy(eps.conj() / denom, &phi_z, linalg::ONE);
        self.downdate_phi(&phi_z, denom);
        self.update_covariances(y);
        self.advance(eps);
        eps
    }

    /// Same contract as [`step`](Self::step), but solves `P[t] c = d[t]` from
    /// scratch. `O(n^3)`; exists as an oracle.
    pub fn step_direct(&mut self, y: C64) -> Result<C64> {
        let eps = y - self.c_hat.dotc(&self.z_hat);
        self.update_covariances(y);
        let chol = Cholesky::new(self.p_hat.clone()).ok_or(Error::IllConditioned {
            what: "empirical covariance",
            cond: f64::INFINITY,
            bound: f64::MAX,
        })?;
        self.c_hat = chol.solve(&self.d);
        self.phi = chol.inverse();
        self.advance(eps);
        Ok(eps)
    }

    /// Least mean squares: the gain `Phi` is replaced by `mu I`. Covariances
    /// are left untouched.
    pub fn lms_step(&mut self, y: C64, mu: f64) -> C64 {
        let eps = y - self.c_hat.dotc(&self.z_hat);
        self.c_hat.axpy(eps.conj() * mu, &self.z_hat, linalg::ONE);
        self.advance(eps);
        eps
    }

    /// Coefficient update driven by the a-posteriori residual
    /// `y[t] - c[t]* z[t]`; solved densely as `(I + k z*) c[t] = c[t-1] + k y*`.
    /// The regressor is still propagated with the prediction residual, which
    /// is returned.
    pub fn step_aposteriori(&mut self, y: C64) -> Result<C64> {
        let n = self.order();
        let z = self.z_hat.clone();
        let eps = y - self.c_hat.dotc(&z);
        let phi_z = &self.phi * &z;
        let denom = self.delta + z.dotc(&phi_z).re;
        let k = phi_z.unscale(denom);
        let system = CMatrix::identity(n, n) + &k * z.adjoint();
        let rhs = &self.c_hat + &k * y.conj();
        self.c_hat = LU::new(system).solve(&rhs).ok_or(Error::IllConditioned {
            what: "a-posteriori system",
            cond: f64::INFINITY,
            bound: f64::MAX,
        })?;
        self.last_posterior = Some(y - self.c_hat.dotc(&z));
        self.downdate_phi(&phi_z, denom);
        self.update_covariances(y);
        self.advance(eps);
        Ok(eps)
    }

    /// One-step prediction `c[t]* z[t+1]`.
    pub fn predict_next(&self) -> C64 {
        self.c_hat.dotc(&self.z_hat)
    }

    /// `c[t]* A^j b` for `j = 0..lags`.
    pub fn estimated_impulse_response(&self, lags: usize) -> Vec<C64> {
        let mut v = self.b.clone();
        (0..lags)
            .map(|_| {
                let h = self.c_hat.dotc(&v);
                v = &self.a * &v;
                h
            })
            .collect()
    }

    /// `||Phi P - I||_F`.
    pub fn inverse_consistency(&self) -> f64 {
        let n = self.order();
        (&self.phi * &self.p_hat - CMatrix::identity(n, n)).norm()
    }

    /// `Phi <- (Phi - Phi z z* Phi / denom) / delta`, re-symmetrized. Rounding
    /// makes `Phi` slightly non-Hermitian, and that part of the error is not
    /// damped by the update, so it would grow like `delta^-t`.
    fn downdate_phi(&mut self, phi_z: &CVector, denom: f64) {
        self.phi.gerc(linalg::real(-1.0 / denom), phi_z, phi_z, linalg::ONE);
        let n = self.phi.nrows();
        let scale = 0.5 / self.delta;
        for j in 0..n {
            self.phi[(j, j)] = linalg::real(self.phi[(j, j)].re / self.delta);
            for i in 0..j {
                let v = (self.phi[(i, j)] + self.phi[(j, i)].conj()) * scale;
                self.phi[(i, j)] = v;
                self.phi[(j, i)] = v.conj();
            }
        }
    }

    fn update_covariances(&mut self, y: C64) {
        let z = &self.z_hat;
        self.p_hat.gerc(linalg::ONE, z, z, linalg::real(self.delta));
        self.d *= linalg::real(self.delta);
        self.d.axpy(y.conj(), z, linalg::ONE);
    }

    fn advance(&mut self, eps: C64) {
        let mut next = &self.a * &self.z_hat;
        next.axpy(eps, &self.b, linalg::ONE);
        self.z_hat = next;
        self.t += 1;
    }
}
