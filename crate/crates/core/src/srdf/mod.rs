//! Square-root displacement filter (SRDF).
//!
//! The filter never forms the empirical covariance `P[t] = R[t] R[t]*`.
//! It works in the moving coordinates `u[t] = R[t-1]^-1 z[t]`, where the
//! covariance is the identity, and carries
//!
//! * the transported coefficients `kappa[t] = R[t]* c[t]`,
//! * `beta[t] = R[t]^-1 b`,
//! * the displacement generator `R[t]^-1 (P - A P A* / delta) R[t]^-*` as an
//!   [`EvdGenerator`],
//! * the transformed advance `R[t]^-1 A R[t]` as a product of rank-one
//!   triangular factors, rebuilt from the generator each step.
//!
//! With `A` upper triangular every step costs `O(alpha^2 n)`.

mod advance;
mod snapshot;
mod wtransform;

use std::time::Instant;

pub use advance::{advance_from_generator, TriangularAdvance};
pub use snapshot::{GeneratorSnapshot, SrdfSnapshot};
pub use wtransform::{compute_w, gamma_of, WTransform};

use crate::displacement::{self, subspace_evd_update_with_floor, EvdGenerator, GeneratorTerm};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64, ZERO};
use crate::tib::{phase_of, TibSystem};

/// Tolerance for the dense cross-check of the initial advance.
pub const INIT_CHECK_TOL: f64 = 1e-9;

/// Multiple of the estimated rounding level below which generator
/// eigenvalues are treated as noise; see [`SrdfOptions::noise_factor`].
pub const DEFAULT_NOISE_FACTOR: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrdfOptions {
    /// Relative eigenvalue cut, against the largest generator eigenvalue.
    pub trunc_tol: f64,
    pub alpha_cap: usize,
    /// Absolute eigenvalue cut, in units of `eps * m / sqrt(1 - d_max)`
    /// where `m` is the size of the update terms and `1 - d_max` the smallest
    /// eigenvalue of `I - V D V*`. The advance is only known to that accuracy
    /// in its weakest direction, so smaller eigenvalues are roundoff. Zero
    /// disables the cut.
    pub noise_factor: f64,
}

impl Default for SrdfOptions {
    fn default() -> Self {
        Self {
            trunc_tol: displacement::DEFAULT_TRUNC_TOL,
            alpha_cap: displacement::DEFAULT_ALPHA_CAP,
            noise_factor: DEFAULT_NOISE_FACTOR,
        }
    }
}

/// Diagnostics from the most recent step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepTrace {
    pub eps: C64,
    /// A-posteriori residual, only for [`SrdfState::step_aposteriori`].
    pub eps_post: Option<C64>,
    pub mu: Vec<C64>,
    pub gamma: f64,
    pub rank: usize,
    pub step_nanos: u64,
}

#[derive(Debug, Clone)]
pub struct SrdfState {
    t: usize,
    delta: f64,
    u: Vec<C64>,
    kappa_coef: Vec<C64>,
    beta: Vec<C64>,
    gen: EvdGenerator,
    advance: TriangularAdvance,
    phases: Vec<C64>,
    noise_factor: f64,
    last_w: Option<WTransform>,
    trace: StepTrace,
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Validation(format!("forgetting factor must lie in (0, 1], got {delta}")));
    }
    Ok(())
}

/// Dense start-up: `R0` (upper, `P0 = R0 R0*`) and the generator of
/// `R0^-1 (P0 - A P0 A* / delta) R0^-*`. `O(n^3)`.
pub fn exact_generator(a: &CMatrix, p0: &CMatrix, delta: f64, opts: SrdfOptions) -> Result<(CMatrix, EvdGenerator)> {
    check_delta(delta)?;
    let n = a.nrows();
    if a.ncols() != n || p0.nrows() != n || p0.ncols() != n {
        return Err(Error::Dimension(format!("expected {n}x{n} advance and covariance")));
    }
    let r0 = linalg::upper_cholesky(&crate::model::hermitian_part(p0))?;
    let disp = displacement::dense_displacement(p0, a, delta);
    let left = r0
        .solve_upper_triangular(&disp)
        .ok_or(Error::NotPositiveDefinite { what: "initial covariance" })?;
    let g0 = r0
        .solve_upper_triangular(&left.adjoint())
        .ok_or(Error::NotPositiveDefinite { what: "initial covariance" })?;
    let gen = EvdGenerator::from_hermitian(&g0, opts.trunc_tol, opts.alpha_cap)?;
    Ok((r0, gen))
}

/// Exact initialization from an arbitrary positive definite `P0`.
///
/// `A` must be upper triangular. Returns the state and `R0` (for tests that
/// shadow the filter densely).
pub fn srdf_init_exact(
    a: &CMatrix,
    b: &CVector,
    p0: &CMatrix,
    c0: &CVector,
    delta: f64,
    z1: Option<&CVector>,
) -> Result<(SrdfState, CMatrix)> {
    srdf_init_exact_with(a, b, p0, c0, delta, z1, SrdfOptions::default())
}

/// [`srdf_init_exact`] with explicit options.
pub fn srdf_init_exact_with(
    a: &CMatrix,
    b: &CVector,
    p0: &CMatrix,
    c0: &CVector,
    delta: f64,
    z1: Option<&CVector>,
    opts: SrdfOptions,
) -> Result<(SrdfState, CMatrix)> {
    let n = a.nrows();
    if b.len() != n || c0.len() != n || z1.is_some_and(|z| z.len() != n) {
        return Err(Error::Dimension(format!("expected length-{n} vectors")));
    }
    if !linalg::is_upper_triangular(a, 0.0) {
        return Err(Error::Validation("the square-root filter needs an upper-triangular advance".into()));
    }
    let (r0, gen) = exact_generator(a, p0, delta, opts)?;
    let phases: Vec<C64> = (0..n).map(|j| phase_of(a[(j, j)])).collect();
    let advance = advance_from_generator(&gen, delta, &phases)?;
    let r0_inv = r0.clone().try_inverse().ok_or(Error::NotPositiveDefinite { what: "initial covariance" })?;
    let dense = &r0_inv * a * &r0;
    let deviation = linalg::frob_diff(&advance.to_dense(), &dense);
    if deviation > INIT_CHECK_TOL * (1.0 + dense.norm()) {
        return Err(Error::InitMismatch { deviation });
    }
    let solve = |v: &CVector| linalg::solve_upper(&r0, v);
    let u = match z1 {
        Some(z) => solve(z)?.as_slice().to_vec(),
        None => vec![ZERO; n],
    };
    let state = SrdfState {
        t: 0,
        delta,
        u,
        kappa_coef: (r0.adjoint() * c0).as_slice().to_vec(),
        beta: solve(b)?.as_slice().to_vec(),
        gen,
        advance,
        phases,
        noise_factor: opts.noise_factor,
        last_w: None,
        trace: StepTrace::default(),
    };
    Ok((state, r0))
}

/// `O(n)` start for a TIB system, prewindowed with zero coefficients.
///
/// Uses `P0 = (rho^2 / kappa) I`, i.e. `R0 = rho kappa^(-1/2) I`, with the
/// rank-one generator `kappa b b*` and advance `sqrt(delta) A`. This is
/// consistent with the exact start only at `delta = 1`; for `delta < 1` the
/// filter runs exactly as the dense filter with advance `sqrt(delta) A`.
pub fn srdf_init_tib_fast(tib: &TibSystem, rho: f64, delta: f64) -> Result<SrdfState> {
    srdf_init_tib_fast_with(tib, rho, delta, SrdfOptions::default())
}

/// [`srdf_init_tib_fast`] with explicit options.
pub fn srdf_init_tib_fast_with(tib: &TibSystem, rho: f64, delta: f64, opts: SrdfOptions) -> Result<SrdfState> {
    check_delta(delta)?;
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Validation("rho must be positive".into()));
    }
    let n = tib.order();
    let r0 = rho / tib.kappa().sqrt();
    let y0 = tib.b() * linalg::real(tib.kappa().sqrt());
    let gen = EvdGenerator::rank_one(1.0, &y0)
        .with_alpha_cap(opts.alpha_cap)?
        .with_trunc_tol(opts.trunc_tol);
    let phases = tib.phases().to_vec();
    let advance = advance_from_generator(&gen, delta, &phases)?;
    Ok(SrdfState {
        t: 0,
        delta,
        u: vec![ZERO; n],
        kappa_coef: vec![ZERO; n],
        beta: tib.b().iter().map(|x| x / r0).collect(),
        gen,
        advance,
        phases,
        noise_factor: opts.noise_factor,
        last_w: None,
        trace: StepTrace::default(),
    })
}

enum CoefficientRule {
    Prediction,
    Posterior,
}

impl SrdfState {
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn order(&self) -> usize {
        self.u.len()
    }

    /// Regressor of the next step in current coordinates.
    pub fn u(&self) -> &[C64] {
        &self.u
    }

    pub fn kappa_coef(&self) -> &[C64] {
        &self.kappa_coef
    }

    pub fn beta(&self) -> &[C64] {
        &self.beta
    }

    pub fn generator(&self) -> &EvdGenerator {
        &self.gen
    }

    pub fn advance(&self) -> &TriangularAdvance {
        &self.advance
    }

    pub fn phases(&self) -> &[C64] {
        &self.phases
    }

    pub fn last_w(&self) -> Option<&WTransform> {
        self.last_w.as_ref()
    }

    pub fn trace(&self) -> &StepTrace {
        &self.trace
    }

    /// One filter step; returns the prediction residual
    /// `e[t] = y[t] - kappa[t-1]* u[t]`.
    pub fn step(&mut self, y: C64) -> Result<C64> {
        self.step_with(y, CoefficientRule::Prediction)
    }

    /// Variant whose coefficient update uses the a-posteriori residual
    /// `y[t] - c[t]* z[t]`. The regressor is still driven by the prediction
    /// residual, which is returned; the a-posteriori one lands in the trace.
    pub fn step_aposteriori(&mut self, y: C64) -> Result<C64> {
        self.step_with(y, CoefficientRule::Posterior)
    }

    fn step_with(&mut self, y: C64, rule: CoefficientRule) -> Result<C64> {
        let started = Instant::now();
        let step = self.t + 1;
        let delta = self.delta;
        let u = &self.u;
        let eps = y - linalg::dotc(&self.kappa_coef, u);
        let s = linalg::norm_sqr(u);
        let a = delta + s;

        // coefficients in R[t-1] coordinates, then carried over by W^-*
        let (mut coef, eps_post) = match rule {
            CoefficientRule::Prediction => {
                let gain = eps.conj() / a;
                (self.kappa_coef.iter().zip(u).map(|(k, ui)| k + ui * gain).collect::<Vec<_>>(), None)
            }
            CoefficientRule::Posterior => {
                let gain = y.conj() / a;
                let x: Vec<C64> = self.kappa_coef.iter().zip(u).map(|(k, ui)| k + ui * gain).collect();
                // (I + u u* / a)^-1 x = x - u (u* x) / (a + s)
                let proj = linalg::dotc(u, &x) / (a + s);
                let v: Vec<C64> = x.iter().zip(u).map(|(xi, ui)| xi - ui * proj).collect();
                let post = y - linalg::dotc(&v, u);
                (v, Some(post))
            }
        };

        let w = compute_w(u, delta)?;
        w.apply_inverse_adjoint(&mut coef);
        let mut beta = self.beta.clone();
        w.apply(&mut beta);
        let mut wu = CVector::from_column_slice(u);
        w.apply(wu.as_mut_slice());
        // mu = W A~[t-1] u = R[t]^-1 A z[t]
        let mut mu = CVector::from_column_slice(u);
        self.advance.apply(mu.as_mut_slice());
        w.apply(mu.as_mut_slice());

        let floor = self.noise_floor(wu.norm_squared().max(mu.norm_squared() / delta));
        let terms = [GeneratorTerm::new(1.0, 1.0, wu), GeneratorTerm::new(-1.0, 1.0 / delta, mu)];
        let gen = subspace_evd_update_with_floor(&self.gen, delta, &terms, Some(&w), floor).map_err(|e| e.at_step(step))?;
        let advance = advance_from_generator(&gen, delta, &self.phases).map_err(|e| e.at_step(step))?;
        let [wu, mu] = terms.map(|t| t.vector);

        let mut next: Vec<C64> = wu.data.into();
        advance.apply(&mut next);
        for (ni, bi) in next.iter_mut().zip(&beta) {
            *ni += bi * eps;
        }

        self.trace = StepTrace {
            eps,
            eps_post,
            gamma: gamma_of(&self.u, delta),
            rank: gen.rank(),
            mu: mu.data.into(),
            step_nanos: started.elapsed().as_nanos() as u64,
        };
        self.t = step;
        self.u = next;
        self.kappa_coef = coef;
        self.beta = beta;
        self.gen = gen;
        self.advance = advance;
        self.last_w = Some(w);
        Ok(eps)
    }

    fn noise_floor(&self, term_size: f64) -> f64 {
        let d = self.gen.d();
        let d_max = d.iter().copied().fold(0.0, f64::max);
        let d_abs = d.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let weakest = (1.0 - d_max).max(f64::EPSILON);
        self.noise_factor * f64::EPSILON * term_size.max(self.delta * d_abs) / weakest.sqrt()
    }

    pub fn noise_factor(&self) -> f64 {
        self.noise_factor
    }

    /// One-step prediction `c[t]* z[t+1] = kappa[t]* u[t+1]`.
    pub fn predict_next(&self) -> C64 {
        linalg::dotc(&self.kappa_coef, &self.u)
    }

    /// `c[t]* A^j b` for `j = 0..lags`, evaluated as
    /// `kappa[t]* (R^-1 A R)^j beta[t]` in `O(alpha n lags)`.
    pub fn estimated_impulse_response(&self, lags: usize) -> Vec<C64> {
        let mut v = self.beta.clone();
        (0..lags)
            .map(|_| {
                let h = linalg::dotc(&self.kappa_coef, &v);
                self.advance.apply(&mut v);
                h
            })
            .collect()
    }

    pub fn snapshot(&self) -> SrdfSnapshot {
        SrdfSnapshot::from_state(self)
    }

    pub fn from_snapshot(snap: &SrdfSnapshot) -> Result<Self> {
        snap.restore()
    }
}
