use crate::displacement::ColumnTransform;
use crate::error::Result;
use crate::linalg::{self, CMatrix, C64, ONE, ZERO};
use crate::tib::RankOneUTFactor;

/// Per-step change of square-root coordinates `W = R[t]^-1 R[t-1]`.
///
/// `W` is upper triangular with positive diagonal and
/// `W^-1 W^-* = delta I + u u*`. It is stored through `W^-1 = sqrt(delta) F`
/// with `F` the rank-one factor of `I + u u* / delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct WTransform {
    delta: f64,
    root_delta: f64,
    factor: RankOneUTFactor,
}

pub fn compute_w(u: &[C64], delta: f64) -> Result<WTransform> {
    let factor = RankOneUTFactor::new(-1.0 / delta, u.to_vec())?;
    Ok(WTransform { delta, root_delta: delta.sqrt(), factor })
}

impl WTransform {
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn u(&self) -> &[C64] {
        self.factor.xi()
    }

    pub fn factor(&self) -> &RankOneUTFactor {
        &self.factor
    }

    /// `v <- W v`.
    pub fn apply(&self, v: &mut [C64]) {
        self.factor.solve(v);
        v.iter_mut().for_each(|x| *x /= self.root_delta);
    }

    /// `v <- W* v`.
    pub fn apply_adjoint(&self, v: &mut [C64]) {
        self.factor.solve_adjoint(v);
        v.iter_mut().for_each(|x| *x /= self.root_delta);
    }

    /// `v <- W^-1 v`.
    pub fn apply_inverse(&self, v: &mut [C64]) {
        self.factor.apply(v);
        v.iter_mut().for_each(|x| *x *= self.root_delta);
    }

    /// `v <- W^-* v`.
    pub fn apply_inverse_adjoint(&self, v: &mut [C64]) {
        self.factor.apply_adjoint(v);
        v.iter_mut().for_each(|x| *x *= self.root_delta);
    }

    /// Dense `W`.
    pub fn to_dense(&self) -> CMatrix {
        let n = self.factor.len();
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

impl ColumnTransform for WTransform {
    fn apply_in_place(&self, v: &mut [C64]) {
        self.apply(v)
    }
}

/// Smaller root of `2 g - g^2 |u|^2 = 1 / (delta + |u|^2)`, so that
/// `(I - g u u*)^2 = delta (delta I + u u*)^-1 = delta W* W` and hence
/// `W = delta^(-1/2) Q (I - g u u*)` with `Q` unitary.
///
/// The unitary factor has to sit on the left: `W* W` is fixed by the
/// recursion, `W W*` is not.
pub fn gamma_of(u: &[C64], delta: f64) -> f64 {
    let s = linalg::norm_sqr(u);
    // (1 - sqrt(delta / (delta + s))) / s, rearranged to avoid cancellation
    1.0 / ((delta + s) * (1.0 + (delta / (delta + s)).sqrt()))
}
