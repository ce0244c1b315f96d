use serde::{Deserialize, Serialize};

use super::{advance_from_generator, SrdfState, StepTrace};
use crate::displacement::EvdGenerator;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

/// Serializable filter state.
///
/// The advance is not stored: it is a deterministic function of the
/// generator, so a restored filter continues bit-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrdfSnapshot {
    pub t: usize,
    pub delta: f64,
    pub u: Vec<C64>,
    pub kappa_coef: Vec<C64>,
    pub beta: Vec<C64>,
    pub phases: Vec<C64>,
    pub gen: GeneratorSnapshot,
    #[serde(default = "default_noise_factor")]
    pub noise_factor: f64,
}

fn default_noise_factor() -> f64 {
    super::DEFAULT_NOISE_FACTOR
}

/// `(V, D)` of the displacement generator, `V` stored column by column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSnapshot {
    pub v: Vec<Vec<C64>>,
    pub d: Vec<f64>,
    pub alpha_cap: usize,
    pub trunc_tol: f64,
}

impl SrdfSnapshot {
    pub(super) fn from_state(s: &SrdfState) -> Self {
        Self {
            t: s.t,
            delta: s.delta,
            u: s.u.clone(),
            kappa_coef: s.kappa_coef.clone(),
            beta: s.beta.clone(),
            phases: s.phases.clone(),
            gen: GeneratorSnapshot {
                v: s.gen.v().column_iter().map(|c| c.iter().copied().collect()).collect(),
                d: s.gen.d().to_vec(),
                alpha_cap: s.gen.alpha_cap(),
                trunc_tol: s.gen.trunc_tol(),
            },
            noise_factor: s.noise_factor,
        }
    }

    pub(super) fn restore(&self) -> Result<SrdfState> {
        let n = self.u.len();
        let g = &self.gen;
        if [self.kappa_coef.len(), self.beta.len(), self.phases.len()].iter().any(|&l| l != n)
            || g.v.len() != g.d.len()
            || g.v.iter().any(|c| c.len() != n)
        {
            return Err(Error::Dimension("inconsistent snapshot sizes".into()));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::Validation(format!("snapshot forgetting factor {} out of range", self.delta)));
        }
        let flat: Vec<C64> = g.v.iter().flatten().copied().collect();
        let v = CMatrix::from_column_slice(n, g.d.len(), &flat);
        let gen = EvdGenerator::from_parts(v, g.d.clone(), g.alpha_cap, g.trunc_tol)?;
        let advance = advance_from_generator(&gen, self.delta, &self.phases)?;
        Ok(SrdfState {
            t: self.t,
            delta: self.delta,
            u: self.u.clone(),
            kappa_coef: self.kappa_coef.clone(),
            beta: self.beta.clone(),
            gen,
            advance,
            phases: self.phases.clone(),
            noise_factor: self.noise_factor,
            last_w: None,
            trace: StepTrace::default(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
