use crate::displacement::EvdGenerator;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64};
use crate::tib::{FactoredTriangular, RankOneUTFactor};

/// Transformed advance `R^-1 A R` held in product form.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangularAdvance {
    rep: FactoredTriangular,
}

impl TriangularAdvance {
    pub fn from_factored(rep: FactoredTriangular) -> Self {
        Self { rep }
    }

    pub fn rep(&self) -> &FactoredTriangular {
        &self.rep
    }

    pub fn apply(&self, v: &mut [C64]) {
        self.rep.apply(v)
    }

    pub fn to_dense(&self) -> CMatrix {
        self.rep.to_dense()
    }

    /// `||A A* - delta (I - V D V*)||_F`, evaluated densely.
    pub fn residual(&self, gen: &EvdGenerator, delta: f64) -> f64 {
        let a = self.to_dense();
        let n = a.nrows();
        let target = (CMatrix::identity(n, n) - gen.to_dense()) * linalg::real(delta);
        (&a * a.adjoint() - target).norm()
    }
}

/// Upper-triangular `M` with `M M* = delta (I - sum_k s_k y_k y_k*)` and
/// diagonal phases `phases`, built from the generator columns
/// `y_k = v_k |d_k|^(1/2)`, `s_k = sign(d_k)`.
///
/// Starting from `sqrt(delta) I`, each column contributes a factor `F_k` with
/// `F_k F_k* = I - s_k xi xi*`, `(F_1 ... F_(k-1)) xi = y_k`. Negative
/// columns go first so every partial product stays nonsingular. `O(alpha^2 n)`.
pub fn advance_from_generator(gen: &EvdGenerator, delta: f64, phases: &[C64]) -> Result<TriangularAdvance> {
    if gen.dim() != phases.len() {
        return Err(Error::Dimension("generator and phase vector differ in size".into()));
    }
    let d = gen.d();
    let negatives = (0..d.len()).filter(|&k| d[k] < 0.0);
    let order = negatives.chain((0..d.len()).filter(|&k| d[k] >= 0.0));
    let mut factors: Vec<RankOneUTFactor> = Vec::with_capacity(d.len());
    for k in order {
        let scale = d[k].abs().sqrt();
        let mut xi: Vec<C64> = gen.v().column(k).iter().map(|x| x * scale).collect();
        for f in &factors {
            f.solve(&mut xi);
        }
        let factor = RankOneUTFactor::new(d[k].signum(), xi)
            .map_err(|e| Error::Factorization { step: 0, column: k, source: Box::new(e) })?;
        factors.push(factor);
    }
    Ok(TriangularAdvance { rep: FactoredTriangular::new(delta.sqrt(), factors, phases.to_vec())? })
}
