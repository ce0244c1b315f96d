//! Displacement structure of the empirical covariance.
//!
//! For the forgetting-factor covariance `P` and advance `A` the displacement
//! `P - A P A* / delta` has low rank. It is carried as an eigendecomposition
//! `V D V*` with orthonormal `V` and real nonzero `D` (the EVD-induced
//! generator `Y = V |D|^(1/2)` with signature `sign(D)`).

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64};

pub const DEFAULT_TRUNC_TOL: f64 = 1e-12;
pub const DEFAULT_ALPHA_CAP: usize = 6;
/// At most this many explicit rank-one terms per update.
pub const MAX_UPDATE_TERMS: usize = 4;

/// Diagonal signature with entries in `{-1, +1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignatureVector(Vec<i8>);

impl SignatureVector {
    pub fn new(entries: Vec<i8>) -> Result<Self> {
        if entries.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::Validation("signature entries must be +1 or -1".into()));
        }
        Ok(Self(entries))
    }

    pub fn entries(&self) -> &[i8] {
        &self.0
    }

    /// Displacement rank `alpha`.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_matrix(&self) -> CMatrix {
        CMatrix::from_diagonal(&CVector::from_iterator(self.len(), self.0.iter().map(|&s| linalg::real(s as f64))))
    }
}

/// Low-rank Hermitian matrix `V diag(D) V*` with `V* V = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvdGenerator {
    v: CMatrix,
    d: Vec<f64>,
    alpha_cap: usize,
    trunc_tol: f64,
}

impl EvdGenerator {
    /// Rank-zero generator on `C^n`.
    pub fn empty(n: usize) -> Self {
        Self { v: CMatrix::zeros(n, 0), d: Vec::new(), alpha_cap: DEFAULT_ALPHA_CAP, trunc_tol: DEFAULT_TRUNC_TOL }
    }

    /// Takes `V` and `D` as given after checking shapes, orthonormality and the cap.
    pub fn from_parts(v: CMatrix, d: Vec<f64>, alpha_cap: usize, trunc_tol: f64) -> Result<Self> {
        if v.ncols() != d.len() {
            return Err(Error::Dimension(format!("V has {} columns but D has {} entries", v.ncols(), d.len())));
        }
        if d.len() > alpha_cap {
            return Err(Error::RankOverflow { rank: d.len(), cap: alpha_cap });
        }
        let g = Self { v, d, alpha_cap, trunc_tol };
        if g.orthonormality_defect() > 1e-8 {
            return Err(Error::Validation("generator columns are not orthonormal".into()));
        }
        Ok(g)
    }

    /// Rank-one generator `s w w*`.
    pub fn rank_one(sign: f64, w: &CVector) -> Self {
        let norm = w.norm();
        if norm == 0.0 {
            return Self::empty(w.len());
        }
        Self {
            v: CMatrix::from_columns(&[w.unscale(norm)]),
            d: vec![sign.signum() * norm * norm],
            alpha_cap: DEFAULT_ALPHA_CAP,
            trunc_tol: DEFAULT_TRUNC_TOL,
        }
    }

    /// Dense eigendecomposition of a Hermitian matrix with relative truncation.
    pub fn from_hermitian(h: &CMatrix, trunc_tol: f64, alpha_cap: usize) -> Result<Self> {
        let (vals, vecs) = linalg::hermitian_eig(h);
        let g = truncate(vals, &vecs, trunc_tol, alpha_cap, 0.0)?;
        Ok(Self { trunc_tol, ..g })
    }

    pub fn with_alpha_cap(mut self, alpha_cap: usize) -> Result<Self> {
        if self.rank() > alpha_cap {
            return Err(Error::RankOverflow { rank: self.rank(), cap: alpha_cap });
        }
        self.alpha_cap = alpha_cap;
        Ok(self)
    }

    pub fn with_trunc_tol(mut self, trunc_tol: f64) -> Self {
        self.trunc_tol = trunc_tol;
        self
    }

    pub fn dim(&self) -> usize {
        self.v.nrows()
    }

    pub fn rank(&self) -> usize {
        self.d.len()
    }

    pub fn v(&self) -> &CMatrix {
        &self.v
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn alpha_cap(&self) -> usize {
        self.alpha_cap
    }

    pub fn trunc_tol(&self) -> f64 {
        self.trunc_tol
    }

    /// Signature `sign(D)`.
    pub fn signature(&self) -> SignatureVector {
        SignatureVector(self.d.iter().map(|&x| if x < 0.0 { -1 } else { 1 }).collect())
    }

    /// Generator columns `y_k = v_k |d_k|^(1/2)`.
    pub fn columns(&self) -> CMatrix {
        let mut y = self.v.clone();
        for (k, &dk) in self.d.iter().enumerate() {
            y.column_mut(k).scale_mut(dk.abs().sqrt());
        }
        y
    }

    pub fn to_dense(&self) -> CMatrix {
        let dv = CMatrix::from_diagonal(&CVector::from_iterator(self.rank(), self.d.iter().map(|&x| linalg::real(x))));
        &self.v * dv * self.v.adjoint()
    }

    /// `||V* V - I||_F`.
    pub fn orthonormality_defect(&self) -> f64 {
        let k = self.rank();
        (self.v.adjoint() * &self.v - CMatrix::identity(k, k)).norm()
    }
}

fn truncate(vals: Vec<f64>, vecs: &CMatrix, trunc_tol: f64, alpha_cap: usize, floor: f64) -> Result<EvdGenerator> {
    let max = vals.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let cut = (trunc_tol * max).max(floor);
    let mut keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] != 0.0 && vals[i].abs() > cut).collect();
    // deterministic order: descending eigenvalue
    keep.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]));
    if keep.len() > alpha_cap {
        return Err(Error::RankOverflow { rank: keep.len(), cap: alpha_cap });
    }
    let n = vecs.nrows();
    let mut v = CMatrix::zeros(n, keep.len());
    for (col, &i) in keep.iter().enumerate() {
        v.set_column(col, &vecs.column(i));
    }
    Ok(EvdGenerator { v, d: keep.iter().map(|&i| vals[i]).collect(), alpha_cap, trunc_tol })
}

/// Linear operator applied to the generator's eigenvectors before an update.
pub trait ColumnTransform {
    fn apply_in_place(&self, v: &mut [C64]);
}

impl<F: Fn(&mut [C64])> ColumnTransform for F {
    fn apply_in_place(&self, v: &mut [C64]) {
        self(v)
    }
}

/// One explicit term `sign * weight * w w*` of an update.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorTerm {
    pub sign: f64,
    pub weight: f64,
    pub vector: CVector,
}

impl GeneratorTerm {
    pub fn new(sign: f64, weight: f64, vector: CVector) -> Self {
        Self { sign: sign.signum(), weight, vector }
    }
}

/// Eigendecomposition of `scale (B V) D (B V)* + sum_i s_i w_i (u_i u_i*)`.
///
/// `B` is the optional `transform`. The columns `[B V | u_1 .. u_m]` are
/// orthonormalized by [`thin_qr`], the projected `(k+m) x (k+m)` Hermitian
/// matrix is diagonalized densely and eigenvalues at or below
/// `trunc_tol * max |lambda|` are dropped. Cost `O(n (k+m)^2)`.
pub fn subspace_evd_update(
    gen: &EvdGenerator,
    scale: f64,
    terms: &[GeneratorTerm],
    transform: Option<&dyn ColumnTransform>,
) -> Result<EvdGenerator> {
    subspace_evd_update_with_floor(gen, scale, terms, transform, 0.0)
}

/// As [`subspace_evd_update`], additionally dropping eigenvalues with
/// magnitude at or below the absolute `floor`.
pub fn subspace_evd_update_with_floor(
    gen: &EvdGenerator,
    scale: f64,
    terms: &[GeneratorTerm],
    transform: Option<&dyn ColumnTransform>,
    floor: f64,
) -> Result<EvdGenerator> {
    if terms.len() > MAX_UPDATE_TERMS {
        return Err(Error::Validation(format!("at most {MAX_UPDATE_TERMS} update terms, got {}", terms.len())));
    }
    if !(scale > 0.0) {
        return Err(Error::Validation("update scale must be positive".into()));
    }
    let n = gen.dim();
    if terms.iter().any(|t| t.vector.len() != n || !(t.weight >= 0.0)) {
        return Err(Error::Dimension(format!("update terms must be length-{n} vectors with nonnegative weight")));
    }
    let k = gen.rank();
    let p = k + terms.len();
    if p == 0 || n == 0 {
        return Ok(EvdGenerator { v: CMatrix::zeros(n, 0), d: Vec::new(), alpha_cap: gen.alpha_cap, trunc_tol: gen.trunc_tol });
    }
    let mut cols = CMatrix::zeros(n, p);
    cols.columns_mut(0, k).copy_from(&gen.v);
    if let Some(tr) = transform {
        for col in cols.as_mut_slice()[..n * k].chunks_exact_mut(n) {
            tr.apply_in_place(col);
        }
    }
    let mut weights: Vec<f64> = gen.d.iter().map(|d| scale * d).collect();
    for (i, term) in terms.iter().enumerate() {
        cols.set_column(k + i, &term.vector);
        weights.push(term.sign * term.weight);
    }
    let (mut q, mut r) = thin_qr(cols);
    // dependent columns leave zero rows in R; drop them before the small solve
    if (0..p).any(|j| r[(j, j)] == linalg::ZERO) {
        let live: Vec<usize> = (0..p).filter(|&j| r[(j, j)] != linalg::ZERO).collect();
        if live.is_empty() {
            return Ok(EvdGenerator { v: CMatrix::zeros(n, 0), d: Vec::new(), alpha_cap: gen.alpha_cap, trunc_tol: gen.trunc_tol });
        }
        q = q.select_columns(&live);
        r = r.select_rows(&live);
    }
    // small = R diag(weights) R*, assembled Hermitian by construction
    let m = r.nrows();
    let mut small = CMatrix::zeros(m, m);
    for i in 0..m {
        for l in i..m {
            let mut acc = linalg::ZERO;
            for (j, &w) in weights.iter().enumerate().skip(l) {
                acc += r[(i, j)] * r[(l, j)].conj() * w;
            }
            small[(i, l)] = acc;
            small[(l, i)] = acc.conj();
        }
        small[(i, i)].im = 0.0;
    }
    let (vals, vecs) = if m == 1 {
        (vec![small[(0, 0)].re], CMatrix::identity(1, 1))
    } else {
        let eig = small.symmetric_eigen();
        (eig.eigenvalues.as_slice().to_vec(), eig.eigenvectors)
    };
    let local = truncate(vals, &vecs, gen.trunc_tol, gen.alpha_cap, floor)?;
    Ok(EvdGenerator { v: q * local.v, d: local.d, alpha_cap: gen.alpha_cap, trunc_tol: gen.trunc_tol })
}

/// Relative residual below which a column counts as dependent on its
/// predecessors in [`thin_qr`].
const DEPENDENT_COLUMN_TOL: f64 = 1e-13;

/// Thin QR of a tall matrix by classical Gram-Schmidt with one full
/// reorthogonalization pass, which keeps `Q` orthonormal to working precision
/// for numerically independent columns. A column whose residual falls below
/// `1e-13` times its norm gets a zero `Q` column and a zero
/// diagonal in `R`, so `Q R` still reproduces the input.
///
/// For the `n x (alpha + 2)` blocks of the update this runs on contiguous
/// column slices and is several times cheaper than a generic Householder QR.
pub fn thin_qr(mut q: CMatrix) -> (CMatrix, CMatrix) {
    let (n, p) = q.shape();
    let mut r = CMatrix::zeros(p, p);
    let data = q.as_mut_slice();
    for j in 0..p {
        let (done, rest) = data.split_at_mut(j * n);
        let col = &mut rest[..n];
        let norm0 = linalg::norm_sqr(col).sqrt();
        for _pass in 0..2 {
            for i in 0..j {
                let qi = &done[i * n..(i + 1) * n];
                let h = linalg::dotc(qi, col);
                r[(i, j)] += h;
                for (c, x) in col.iter_mut().zip(qi) {
                    *c -= x * h;
                }
            }
        }
        let norm = linalg::norm_sqr(col).sqrt();
        if norm > DEPENDENT_COLUMN_TOL * norm0 {
            r[(j, j)] = linalg::real(norm);
            let inv = 1.0 / norm;
            col.iter_mut().for_each(|c| *c *= inv);
        } else {
            col.fill(linalg::ZERO);
        }
    }
    (q, r)
}

/// `P - A P A* / delta`, evaluated densely.
pub fn dense_displacement(p: &CMatrix, a: &CMatrix, delta: f64) -> CMatrix {
    p - (a * p * a.adjoint()) * linalg::real(1.0 / delta)
}

/// Explicit generator assembled from a PLR trajectory.
///
/// `z_hat[j-1]` holds `z[j]` and `eps[j-1]` holds `e[j]`. With
/// `f[t] = sum_{j<=t} delta^(t-j) (A z[j] + b e[j] / 2) e[j]*`,
/// `g = (f + b) / sqrt 2`, `h = (f - b) / sqrt 2`, the generator is
///
/// ```text
/// X[t] = ( A z[t] / sqrt(delta) | delta^((t-1)/2) z[1] | g[t-1] | h[t-1] | delta^(t/2) X0 )
/// S    = ( -1, +1, +1, -1, S0 )
/// ```
///
/// and `X[t] S X[t]*` equals the displacement of `P[t]`.
#[allow(clippy::too_many_arguments)]
pub fn generator_fgh_oracle(
    a: &CMatrix,
    b: &CVector,
    z_hat: &[CVector],
    eps: &[C64],
    delta: f64,
    x0: &CMatrix,
    s0: &SignatureVector,
    t: usize,
) -> Result<(CMatrix, SignatureVector)> {
    if x0.ncols() != s0.len() {
        return Err(Error::Dimension("X0 and S0 disagree in width".into()));
    }
    if t == 0 {
        return Ok((x0.clone(), s0.clone()));
    }
    if z_hat.len() < t {
        return Err(Error::TrajectoryTooShort { needed: t, have: z_hat.len() });
    }
    if eps.len() < t - 1 {
        return Err(Error::TrajectoryTooShort { needed: t - 1, have: eps.len() });
    }
    let n = b.len();
    let mut f = CVector::zeros(n);
    for j in 0..t - 1 {
        f *= linalg::real(delta);
        let mut term = a * &z_hat[j];
        term.axpy(eps[j] * 0.5, b, linalg::ONE);
        f.axpy(eps[j].conj(), &term, linalg::ONE);
    }
    let root2 = std::f64::consts::SQRT_2;
    let g = (&f + b).unscale(root2);
    let h = (&f - b).unscale(root2);
    let mut cols = vec![
        (a * &z_hat[t - 1]).unscale(delta.sqrt()),
        &z_hat[0] * linalg::real(delta.powf((t as f64 - 1.0) / 2.0)),
        g,
        h,
    ];
    let damp = delta.powf(t as f64 / 2.0);
    cols.extend(x0.column_iter().map(|c| c.into_owned() * linalg::real(damp)));
    let mut sig = vec![-1, 1, 1, -1];
    sig.extend_from_slice(s0.entries());
    Ok((CMatrix::from_columns(&cols), SignatureVector::new(sig)?))
}
