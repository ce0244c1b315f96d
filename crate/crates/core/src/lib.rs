//! Adaptive identification of innovations models.
//!
//! Given a known advance `A` and input `b`, the filters here estimate the
//! output vector `c` of
//!
//! ```text
//! z[t+1] = A z[t] + b eps[t]
//! y[t]   = c* z[t] + eps[t]
//! ```
//!
//! by pseudo-linear regression (PLR). [`plr::DensePlrState`] is the `O(n^2)`
//! reference. [`srdf::SrdfState`] is the square-root displacement filter: with
//! `A` upper triangular and input balanced ([`tib`]) it costs `O(n)` per step
//! and reproduces the dense residuals to roundoff.
//!
//! ```
//! use fastplr::harness::{self, ExperimentConfig};
//! use fastplr::srdf;
//!
//! let (truth, series) = harness::synthesize(&ExperimentConfig { n: 8, t: 500, ..Default::default() })?;
//! let mut filter = srdf::srdf_init_tib_fast(&truth.tib, 1.0, 0.99)?;
//! for &y in series.samples() {
//!     filter.step(y)?;
//! }
//! let h = filter.estimated_impulse_response(16);
//! assert_eq!(h.len(), 16);
//! # Ok::<(), fastplr::Error>(())
//! ```
//!
//! # Limitations
//!
//! * Agreement with the dense filter degrades like `eps / prod |lambda|^2`.
//!   Systems with poles near the origin lose digits;
//!   [`harness::EigenSpec::well_conditioned`] avoids that.
//! * PLR converges to the truth only under a positive-real condition on the
//!   true transfer function. Both filters share this limit.
//! * The `O(n)` start is exact only without forgetting. With `delta < 1` it
//!   matches the dense filter run with advance `sqrt(delta) A`.
//!
//! The guide in `book/` covers each piece in more depth.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod displacement;
pub mod error;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod model;
pub mod plr;
pub mod srdf;
pub mod tib;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/plr.md")]
    mod plr {}
    #[doc = include_str!("../../../book/src/displacement.md")]
    mod displacement {}
    #[doc = include_str!("../../../book/src/srdf.md")]
    mod srdf {}
    #[doc = include_str!("../../../book/src/harness.md")]
    mod harness {}
    #[doc = include_str!("../../../book/src/numerics.md")]
    mod numerics {}
}
