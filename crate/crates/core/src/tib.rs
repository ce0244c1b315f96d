//! Triangular input balanced (TIB) realizations and the rank-one triangular
//! factor algebra they are built from.
//!
//! A pair `(A, b)` with `A` upper triangular is in TIB form when
//! `I - A A* = kappa b b*`. Its controllability Gramian is then `I / kappa`,
//! so the impulse-response basis functions `[b, Ab, A^2 b, ...]` are
//! orthogonal with equal norms.

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64, ONE, ZERO};
use crate::model::{self, StateSpaceModel};

/// Upper-triangular factor `F` of `I - c xi xi*`, i.e. `F F* = I - c xi xi*`
/// with a positive diagonal.
///
/// `F[j][j] = f[j]` and `F[i][j] = xi[i] g[j]` for `i < j`, so products and
/// solves with `F` or `F*` cost `O(n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneUTFactor {
    xi: Vec<C64>,
    c: f64,
    t: Vec<f64>,
    f: Vec<f64>,
    g: Vec<C64>,
}

impl RankOneUTFactor {
    /// One backward pass: `t = -c`, then for `j = n..1`
    /// `f_j = sqrt(1 + t |xi_j|^2)`, `g_j = conj(xi_j) t / f_j`, `t <- t / f_j^2`.
    ///
    /// Definiteness is decided by the pivots `f_j^2 > 0` rather than by
    /// `c |xi|^2 < 1`: the product of the pivots is `1 - c |xi|^2`, and the
    /// pivots stay accurate when that difference is far below roundoff.
    pub fn new(c: f64, xi: Vec<C64>) -> Result<Self> {
        let norm2 = linalg::norm_sqr(&xi);
        if !c.is_finite() || xi.iter().any(|x| !(x.re.is_finite() && x.im.is_finite())) {
            return Err(Error::Validation("rank-one factor data must be finite".into()));
        }
        let n = xi.len();
        let mut t = vec![0.0; n];
        let mut f = vec![0.0; n];
        let mut g = vec![ZERO; n];
        let mut tj = -c;
        for j in (0..n).rev() {
            let f2 = 1.0 + tj * xi[j].norm_sqr();
            if !(f2 > 0.0) {
                return Err(Error::Indefinite { c_norm2: c * norm2 });
            }
            t[j] = tj;
            f[j] = f2.sqrt();
            g[j] = xi[j].conj() * (tj / f[j]);
            tj /= f2;
        }
        Ok(Self { xi, c, t, f, g })
    }

    /// Identity factor of size `n` (`c = 0`).
    pub fn identity(n: usize) -> Self {
        Self { xi: vec![ZERO; n], c: 0.0, t: vec![0.0; n], f: vec![1.0; n], g: vec![ZERO; n] }
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn xi(&self) -> &[C64] {
        &self.xi
    }

    /// Backward partial sums `t_j`.
    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.f
    }

    pub fn generators(&self) -> &[C64] {
        &self.g
    }

    /// `v <- F v`.
    pub fn apply(&self, v: &mut [C64]) {
        let mut s = ZERO;
        for i in (0..v.len()).rev() {
            let vi = v[i];
            v[i] = vi * self.f[i] + self.xi[i] * s;
            s += self.g[i] * vi;
        }
    }

    /// `v <- F* v`.
    pub fn apply_adjoint(&self, v: &mut [C64]) {
        let mut s = ZERO;
        for ((vj, f), (g, xi)) in v.iter_mut().zip(&self.f).zip(self.g.iter().zip(&self.xi)) {
            let old = *vj;
            *vj = old * f + g.conj() * s;
            s += xi.conj() * old;
        }
    }

    /// `v <- F^-1 v`.
    pub fn solve(&self, v: &mut [C64]) {
        let mut s = ZERO;
        for i in (0..v.len()).rev() {
            v[i] = (v[i] - self.xi[i] * s) / self.f[i];
            s += self.g[i] * v[i];
        }
    }

    /// `v <- F^-* v`.
    pub fn solve_adjoint(&self, v: &mut [C64]) {
        let mut s = ZERO;
        for ((vj, f), (g, xi)) in v.iter_mut().zip(&self.f).zip(self.g.iter().zip(&self.xi)) {
            *vj = (*vj - g.conj() * s) / f;
            s += xi.conj() * *vj;
        }
    }

    pub fn to_dense(&self) -> CMatrix {
        let n = self.len();
        CMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Equal => linalg::real(self.f[j]),
            std::cmp::Ordering::Less => self.xi[i] * self.g[j],
            std::cmp::Ordering::Greater => ZERO,
        })
    }
}

/// `scale * F1 * F2 * ... * Fk * diag(phases)`, an upper-triangular matrix
/// stored as a product of rank-one factors. Products and solves cost `O(kn)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredTriangular {
    scale: f64,
    factors: Vec<RankOneUTFactor>,
    phases: Vec<C64>,
}

impl FactoredTriangular {
    pub fn new(scale: f64, factors: Vec<RankOneUTFactor>, phases: Vec<C64>) -> Result<Self> {
        let n = phases.len();
        if factors.iter().any(|f| f.len() != n) {
            return Err(Error::Dimension("factor sizes differ from the phase vector".into()));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Validation("scale must be positive".into()));
        }
        if phases.iter().any(|p| (p.norm() - 1.0).abs() > 1e-12) {
            return Err(Error::Validation("phases must have unit modulus".into()));
        }
        Ok(Self { scale, factors, phases })
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn factors(&self) -> &[RankOneUTFactor] {
        &self.factors
    }

    pub fn phases(&self) -> &[C64] {
        &self.phases
    }

    pub fn apply(&self, v: &mut [C64]) {
        for (x, p) in v.iter_mut().zip(&self.phases) {
            *x *= p;
        }
        for f in self.factors.iter().rev() {
            f.apply(v);
        }
        scale_slice(v, self.scale);
    }

    pub fn apply_adjoint(&self, v: &mut [C64]) {
        scale_slice(v, self.scale);
        for f in &self.factors {
            f.apply_adjoint(v);
        }
        for (x, p) in v.iter_mut().zip(&self.phases) {
            *x *= p.conj();
        }
    }

    pub fn solve(&self, v: &mut [C64]) {
        for f in &self.factors {
            f.solve(v);
        }
        for (x, p) in v.iter_mut().zip(&self.phases) {
            *x *= p.conj();
        }
        scale_slice(v, 1.0 / self.scale);
    }

    pub fn solve_adjoint(&self, v: &mut [C64]) {
        for (x, p) in v.iter_mut().zip(&self.phases) {
            *x *= p;
        }
        for f in self.factors.iter().rev() {
            f.solve_adjoint(v);
        }
        scale_slice(v, 1.0 / self.scale);
    }

    pub fn apply_vec(&self, v: &CVector) -> CVector {
        let mut out = v.clone();
        self.apply(out.as_mut_slice());
        out
    }

    /// Diagonal of the represented matrix.
    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.len())
            .map(|j| {
                let mag = self.factors.iter().fold(self.scale, |acc, f| acc * f.f[j]);
                self.phases[j] * mag
            })
            .collect()
    }

    pub fn to_dense(&self) -> CMatrix {
        let n = self.len();
        let mut out = CMatrix::zeros(n, n);
        let mut col = vec![ZERO; n];
        for j in 0..n {
            col.iter_mut().for_each(|x| *x = ZERO);
            col[j] = ONE;
            self.apply(&mut col);
            out.column_mut(j).copy_from_slice(&col);
        }
        out
    }
}

fn scale_slice(v: &mut [C64], s: f64) {
    if s != 1.0 {
        v.iter_mut().for_each(|x| *x *= s);
    }
}

/// Unit-modulus phase of `z`; `1` for `z = 0`.
pub fn phase_of(z: C64) -> C64 {
    let r = z.norm();
    if r == 0.0 {
        ONE
    } else {
        z / r
    }
}

/// An upper-triangular TIB pair `(A, b)` with `I - A A* = kappa b b*`,
/// `kappa = sigma2 / r`.
#[derive(Debug, Clone, PartialEq)]
pub struct TibSystem {
    a: CMatrix,
    b: CVector,
    kappa: f64,
    r: f64,
    sigma2: f64,
    factored: FactoredTriangular,
}

/// Builds the TIB form with the prescribed eigenvalues on the diagonal of
/// `A`, in the order given.
///
/// `b` is real and nonnegative. The returned system uses `sigma2 = 1`,
/// `r = 1 / kappa`; see [`TibSystem::with_sigma2`].
pub fn tib_from_eigenvalues(eigs: &[C64], kappa: f64) -> Result<TibSystem> {
    if eigs.is_empty() {
        return Err(Error::Validation("need at least one eigenvalue".into()));
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::Validation("kappa must be positive".into()));
    }
    for (index, l) in eigs.iter().enumerate() {
        let m = l.norm();
        if !(m < 1.0) {
            return Err(Error::Unstable { radius: m, bound: 1.0 });
        }
        if m == 0.0 {
            return Err(Error::Singular { index });
        }
    }
    let n = eigs.len();
    let mut b = vec![ZERO; n];
    let mut t = vec![0.0; n];
    let mut f = vec![0.0; n];
    let mut g = vec![ZERO; n];
    let mut tj = -kappa;
    for j in (0..n).rev() {
        let m2 = eigs[j].norm_sqr();
        let bj = ((m2 - 1.0) / tj).sqrt();
        b[j] = linalg::real(bj);
        t[j] = tj;
        f[j] = m2.sqrt();
        g[j] = linalg::real(bj * tj / f[j]);
        tj /= m2;
    }
    let phases: Vec<C64> = eigs.iter().map(|&l| phase_of(l)).collect();
    let factor = RankOneUTFactor { xi: b.clone(), c: kappa, t, f, g };
    let a = CMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Equal => eigs[j],
        std::cmp::Ordering::Less => factor.xi[i] * factor.g[j] * phases[j],
        std::cmp::Ordering::Greater => ZERO,
    });
    let factored = FactoredTriangular { scale: 1.0, factors: vec![factor], phases };
    Ok(TibSystem { a, b: CVector::from_vec(b), kappa, r: 1.0 / kappa, sigma2: 1.0, factored })
}

impl TibSystem {
    /// Reinterprets the same `(A, b)` for innovations of variance `sigma2`,
    /// which fixes the Gramian level `r = sigma2 / kappa`.
    pub fn with_sigma2(mut self, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::Validation("sigma2 must be positive".into()));
        }
        self.sigma2 = sigma2;
        self.r = sigma2 / self.kappa;
        Ok(self)
    }

    /// Rebuilds a TIB system from stored parts, checking the defining equation.
    pub fn from_parts(a: CMatrix, b: CVector, kappa: f64, sigma2: f64) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.len() != n {
            return Err(Error::Dimension("A must be square and conformal with b".into()));
        }
        if !linalg::is_upper_triangular(&a, 0.0) {
            return Err(Error::Validation("TIB advance must be upper triangular".into()));
        }
        let eigs: Vec<C64> = (0..n).map(|i| a[(i, i)]).collect();
        let rebuilt = tib_from_eigenvalues(&eigs, kappa)?.with_sigma2(sigma2)?;
        // canonical representative has b >= 0; accept inputs equal up to roundoff
        if linalg::frob_diff(&rebuilt.a, &a) > 1e-9 * (n as f64) || (&rebuilt.b - &b).norm() > 1e-9 * (n as f64) {
            return Err(Error::Validation("stored TIB data does not match its canonical form".into()));
        }
        Ok(rebuilt)
    }

    pub fn order(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self) -> &CMatrix {
        &self.a
    }

    pub fn b(&self) -> &CVector {
        &self.b
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        (0..self.order()).map(|i| self.a[(i, i)]).collect()
    }

    pub fn phases(&self) -> &[C64] {
        self.factored.phases()
    }

    /// `A` as a rank-one factor times diagonal phases.
    pub fn factored(&self) -> &FactoredTriangular {
        &self.factored
    }

    /// Innovations model with this `(A, b)` and the given output vector.
    pub fn model(&self, c: CVector) -> Result<StateSpaceModel> {
        StateSpaceModel::from_parts_unchecked(self.a.clone(), self.b.clone(), c)
    }

    pub fn residual(&self) -> f64 {
        verify_tib(&self.a, &self.b, self.kappa)
    }
}

/// `||I - A A* - kappa b b*||_F`.
pub fn verify_tib(a: &CMatrix, b: &CVector, kappa: f64) -> f64 {
    let n = a.nrows();
    let m = CMatrix::identity(n, n) - a * a.adjoint() - (b * b.adjoint()) * linalg::real(kappa);
    m.norm()
}

/// `[b, Ab, ..., A^(lags-1) b]`.
pub fn truncated_basis(a: &CMatrix, b: &CVector, lags: usize) -> CMatrix {
    let n = b.len();
    let mut m = CMatrix::zeros(n, lags);
    let mut v = b.clone();
    for j in 0..lags {
        m.set_column(j, &v);
        v = a * v;
    }
    m
}

/// Controllability Gramian `sum_j A^j b b* A*^j` as `M M*` with `M` the
/// truncated basis. Truncation follows the same tail rule as
/// [`model::solve_stein`].
pub fn gramian_series(a: &CMatrix, b: &CVector, tol: f64) -> Result<CMatrix> {
    let rho = linalg::spectral_radius(a)?;
    if rho >= 1.0 - model::STEIN_MARGIN {
        return Err(Error::Unstable { radius: rho, bound: 1.0 - model::STEIN_MARGIN });
    }
    let n = b.len();
    let tail = 1.0 / (1.0 - rho * rho);
    let mut cols = Vec::new();
    let mut v = b.clone();
    loop {
        let next = a * &v;
        cols.push(v);
        v = next;
        if cols.len() >= n && v.norm_squared() * tail <= tol {
            break;
        }
        if cols.len() > 10_000_000 / n.max(1) {
            return Err(Error::Unstable { radius: rho, bound: 1.0 - model::STEIN_MARGIN });
        }
    }
    let m = CMatrix::from_columns(&cols);
    Ok(&m * m.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c64, frob_diff, identity, real, upper_cholesky};

    fn random_vec(n: usize, seed: u64) -> Vec<C64> {
        // small deterministic generator; tests only need spread-out values
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        (0..n).map(|_| c64(next(), next())).collect()
    }

    /// Dense UT factor of `I - c xi xi*` through the flipped Cholesky.
    fn dense_oracle(c: f64, xi: &[C64]) -> CMatrix {
        let x = CVector::from_column_slice(xi);
        upper_cholesky(&(identity(xi.len()) - (&x * x.adjoint()) * real(c))).unwrap()
    }

    #[test]
    fn zero_coefficient_gives_identity() {
        let f = RankOneUTFactor::new(0.0, random_vec(4, 1)).unwrap();
        assert_eq!(f.to_dense(), identity(4));
    }

    #[test]
    fn scalar_factor() {
        let f = RankOneUTFactor::new(0.5, vec![ONE]).unwrap();
        assert!((f.diagonal()[0] - 0.5f64.sqrt()).abs() < 1e-16);
    }

    #[test]
    fn factor_matches_dense_cholesky() {
        let xi = random_vec(5, 2);
        let c = 0.9 / linalg::norm_sqr(&xi);
        let f = RankOneUTFactor::new(c, xi.clone()).unwrap();
        let dense = f.to_dense();
        assert!(frob_diff(&dense, &dense_oracle(c, &xi)) < 1e-12);
        let x = CVector::from_column_slice(&xi);
        let target = identity(5) - (&x * x.adjoint()) * real(c);
        assert!(frob_diff(&(&dense * dense.adjoint()), &target) < 1e-12 * 5.0);
        // negative c (an update rather than a downdate)
        let f = RankOneUTFactor::new(-3.0, xi.clone()).unwrap();
        assert!(frob_diff(&f.to_dense(), &dense_oracle(-3.0, &xi)) < 1e-12);
    }

    #[test]
    fn both_partial_sum_recursions_agree() {
        let xi = random_vec(6, 3);
        let f = RankOneUTFactor::new(0.5 / linalg::norm_sqr(&xi), xi).unwrap();
        for j in 1..6 {
            let via_f = f.t[j] / (f.f[j] * f.f[j]);
            let via_g = f.t[j] - f.g[j].norm_sqr();
            assert!((via_f - f.t[j - 1]).abs() < 1e-15 && (via_g - f.t[j - 1]).abs() < 1e-15);
        }
    }

    #[test]
    fn factor_rejects_indefinite() {
        let xi = vec![ONE, ONE];
        assert!(matches!(RankOneUTFactor::new(0.5, xi.clone()), Err(Error::Indefinite { .. })));
        assert!(RankOneUTFactor::new(0.49, xi).is_ok());
    }

    #[test]
    fn fast_products_match_dense() {
        let xi = random_vec(7, 4);
        let f = RankOneUTFactor::new(0.7 / linalg::norm_sqr(&xi), xi).unwrap();
        let dense = f.to_dense();
        let v = CVector::from_vec(random_vec(7, 5));
        let mut w = v.as_slice().to_vec();
        f.apply(&mut w);
        assert!((CVector::from_vec(w.clone()) - &dense * &v).norm() < 1e-13);
        f.solve(&mut w);
        assert!((CVector::from_vec(w) - &v).norm() < 1e-12);
        let mut w = v.as_slice().to_vec();
        f.apply_adjoint(&mut w);
        assert!((CVector::from_vec(w.clone()) - dense.adjoint() * &v).norm() < 1e-13);
        f.solve_adjoint(&mut w);
        assert!((CVector::from_vec(w) - &v).norm() < 1e-12);
    }

    #[test]
    fn factored_product_matches_dense() {
        let n = 6;
        let factors: Vec<_> = (0..3)
            .map(|k| {
                let xi = random_vec(n, 10 + k);
                let c = if k % 2 == 0 { -0.8 } else { 0.6 / linalg::norm_sqr(&xi) };
                RankOneUTFactor::new(c, xi).unwrap()
            })
            .collect();
        let phases: Vec<C64> = random_vec(n, 20).into_iter().map(phase_of).collect();
        let m = FactoredTriangular::new(0.9, factors.clone(), phases.clone()).unwrap();
        let dense = factors.iter().fold(identity(n) * real(0.9), |acc, f| acc * f.to_dense())
            * CMatrix::from_diagonal(&CVector::from_vec(phases));
        assert!(frob_diff(&m.to_dense(), &dense) < 1e-12);
        assert!(linalg::is_upper_triangular(&m.to_dense(), 1e-15));
        let diag = m.diagonal();
        assert!((0..n).all(|j| (diag[j] - dense[(j, j)]).norm() < 1e-14));
        let v = CVector::from_vec(random_vec(n, 21));
        let mut w = v.as_slice().to_vec();
        m.apply_adjoint(&mut w);
        assert!((CVector::from_vec(w.clone()) - dense.adjoint() * &v).norm() < 1e-12);
        m.solve_adjoint(&mut w);
        assert!((CVector::from_vec(w) - &v).norm() < 1e-12);
        let mut w = v.as_slice().to_vec();
        m.apply(&mut w);
        m.solve(&mut w);
        assert!((CVector::from_vec(w) - &v).norm() < 1e-12);
    }

    #[test]
    fn scalar_tib() {
        let tib = tib_from_eigenvalues(&[real(0.5)], 1.0).unwrap();
        assert!((tib.b()[0].re - 0.75f64.sqrt()).abs() < 1e-15);
        assert_eq!(tib.a()[(0, 0)], real(0.5));
    }

    #[test]
    fn repeated_eigenvalue_tib() {
        let tib = tib_from_eigenvalues(&[real(0.9), real(0.9)], 1.0).unwrap();
        assert!(tib.residual() <= 1e-12);
        assert_eq!(tib.eigenvalues(), vec![real(0.9), real(0.9)]);
    }

    #[test]
    fn complex_tib_under_permutations() {
        let w = std::f64::consts::FRAC_PI_4;
        let base = [C64::from_polar(0.8, w), C64::from_polar(0.8, -w), real(0.5), real(0.3)];
        let perms = [[0, 1, 2, 3], [3, 2, 1, 0], [2, 0, 3, 1], [1, 3, 0, 2]];
        for p in perms {
            let eigs: Vec<C64> = p.iter().map(|&i| base[i]).collect();
            let tib = tib_from_eigenvalues(&eigs, 1.0).unwrap();
            assert!(tib.residual() <= 1e-12, "residual {}", tib.residual());
            assert_eq!(tib.eigenvalues(), eigs);
            assert!(tib.b().iter().all(|x| x.im == 0.0 && x.re > 0.0));
            assert!(tib.kappa() * tib.b().norm_squared() <= 1.0);
            assert!(frob_diff(&tib.factored().to_dense(), tib.a()) < 1e-14);
        }
    }

    #[test]
    fn tib_rejects_unstable_and_zero() {
        assert!(matches!(tib_from_eigenvalues(&[real(1.0)], 1.0), Err(Error::Unstable { .. })));
        assert!(matches!(tib_from_eigenvalues(&[real(0.5), ZERO], 1.0), Err(Error::Singular { index: 1 })));
    }

    #[test]
    fn verify_tib_cases() {
        // A = 0, kappa |b|^2 = 1
        let r = verify_tib(&CMatrix::zeros(1, 1), &CVector::from_element(1, real(0.5)), 4.0);
        assert!(r < 1e-15);
        let tib = tib_from_eigenvalues(&[real(0.7), c64(0.2, 0.5), real(-0.4)], 2.0).unwrap();
        assert!(verify_tib(tib.a(), tib.b(), tib.kappa()) <= 1e-10 * 3.0);
        let mut a = tib.a().clone();
        a[(0, 2)] += real(1e-3);
        assert!(verify_tib(&a, tib.b(), tib.kappa()) >= 1e-4);
    }

    #[test]
    fn gramian_of_tib_is_scaled_identity() {
        let tib = tib_from_eigenvalues(&[real(0.6), c64(0.1, 0.7), c64(0.1, -0.7), real(-0.5)], 0.5)
            .unwrap()
            .with_sigma2(2.0)
            .unwrap();
        let g = gramian_series(tib.a(), tib.b(), 1e-13).unwrap();
        // kappa = sigma2 / r, so the Gramian is I / kappa
        assert!(frob_diff(&g, &(identity(4) * real(1.0 / tib.kappa()))) < 1e-11);
        let p = model::solve_stein(tib.a(), tib.b(), tib.sigma2(), 1e-13).unwrap();
        assert!(frob_diff(&p, &(identity(4) * real(tib.r()))) < 1e-11);
    }

    #[test]
    fn gramian_trivial_and_generic() {
        let b = CVector::from_vec(vec![c64(1.0, 1.0), real(2.0)]);
        let g = gramian_series(&CMatrix::zeros(2, 2), &b, 1e-14).unwrap();
        assert!(frob_diff(&g, &(&b * b.adjoint())) < 1e-15);
        let a = CMatrix::from_row_slice(2, 2, &[c64(0.4, 0.2), real(0.3), c64(0.0, -0.2), real(-0.6)]);
        let g = gramian_series(&a, &b, 1e-14).unwrap();
        let direct = model::solve_stein_direct(&a, &b, 1.0).unwrap();
        assert!(frob_diff(&g, &direct) < 1e-12);
    }
}
