//! Square-root filter against the dense filter on random systems and data.

use fastplr::harness::{self, EigenSpec, ExperimentConfig, Init, Method, TruthDraw, TruthModel};
use fastplr::Error;
use fastplr::linalg::{CVector, C64};
use fastplr::model::{impulse_response, TimeSeries};
use fastplr::plr::{plr_init, DensePlrState};
use fastplr::srdf::{self, SrdfState};
use proptest::prelude::*;

/// Poles kept off the origin: the square-root recursion loses accuracy in
/// proportion to `eps / prod |lambda|^2` (see the crate docs), and a uniform
/// disk draw occasionally lands a pole at `|lambda| ~ 0.05`.
fn data(n: usize, t: usize, seed: u64) -> (TruthModel, TimeSeries) {
    let eigenvalues = EigenSpec::Annulus { inner: 0.6, outer: 0.95 };
    let cfg = ExperimentConfig { n, t, seed, eigenvalues, ..Default::default() };
    harness::synthesize(&cfg).unwrap()
}

fn exact_pair(truth: &TruthModel, delta: f64) -> (SrdfState, DensePlrState) {
    let tib = &truth.tib;
    let zero = CVector::zeros(tib.order());
    let p0 = harness::exact_initial_covariance(tib, delta, 1.0).unwrap();
    let (fast, _) = srdf::srdf_init_exact(tib.a(), tib.b(), &p0, &zero, delta, None).unwrap();
    let dense = plr_init(tib.a(), tib.b(), &p0, &zero, delta).unwrap();
    (fast, dense)
}

fn gap(a: C64, b: C64) -> f64 {
    (a - b).norm() / (1.0 + b.norm())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn exact_start_tracks_dense_filter(seed in 0u64..10_000, n in 2usize..9, delta in 0.97..0.999f64) {
        let (truth, series) = data(n, 300, seed);
        let (mut fast, mut dense) = exact_pair(&truth, delta);
        for &y in series.samples() {
            let ef = fast.step(y).unwrap();
            let es = dense.step(y);
            prop_assert!(gap(ef, es) <= 1e-8, "gap {:e} at t={}", gap(ef, es), fast.t());
            prop_assert!(gap(fast.predict_next(), dense.predict_next()) <= 1e-8);
        }
        let hf = fast.estimated_impulse_response(30);
        let hs = dense.estimated_impulse_response(30);
        for (a, b) in hf.iter().zip(&hs) {
            prop_assert!((a - b).norm() <= 1e-6);
        }
    }

    #[test]
    fn aposteriori_tracks_dense_filter(seed in 0u64..10_000, n in 2usize..7) {
        let (truth, series) = data(n, 200, seed);
        let (mut fast, mut dense) = exact_pair(&truth, 0.99);
        for &y in series.samples() {
            let ef = fast.step_aposteriori(y).unwrap();
            let es = dense.step_aposteriori(y).unwrap();
            prop_assert!(gap(ef, es) <= 1e-8);
            let post_f = fast.trace().eps_post.unwrap();
            let post_s = dense.last_posterior_residual().unwrap();
            prop_assert!(gap(post_f, post_s) <= 1e-8);
        }
    }

    #[test]
    fn fast_start_without_forgetting_is_exact(seed in 0u64..10_000, n in 2usize..9, rho in 0.3..3.0f64) {
        let (truth, series) = data(n, 200, seed);
        let tib = &truth.tib;
        let mut fast = srdf::srdf_init_tib_fast(tib, rho, 1.0).unwrap();
        let p0 = harness::fast_initial_covariance(tib, rho);
        let mut dense = plr_init(tib.a(), tib.b(), &p0, &CVector::zeros(n), 1.0).unwrap();
        for &y in series.samples() {
            let ef = fast.step(y).unwrap();
            let es = dense.step(y);
            prop_assert!(gap(ef, es) <= 1e-9);
        }
    }
}

#[test]
fn harness_methods_agree_on_the_same_seed() {
    let base = ExperimentConfig { n: 6, t: 400, seed: 31, init: Init::Exact, record_timing: false, ..Default::default() };
    let srdf = harness::run_experiment(&ExperimentConfig { method: Method::Srdf, ..base.clone() }).unwrap();
    let dense = harness::run_experiment(&ExperimentConfig { method: Method::PlrDense, ..base }).unwrap();
    for (a, b) in srdf.residuals.iter().zip(&dense.residuals) {
        assert!(gap(*a, *b) <= 1e-8);
    }
    assert!((srdf.final_coefficient_error - dense.final_coefficient_error).abs() <= 1e-6);
}

#[test]
fn lms_learns_but_trails_the_least_squares_filter() {
    let cfg = ExperimentConfig {
        n: 4,
        t: 4000,
        seed: 12,
        truth: TruthDraw::PositiveReal,
        record_timing: false,
        ..Default::default()
    };
    let truth = harness::build_truth(&cfg).unwrap();
    let lags = harness::ir_lags(truth.max_modulus());
    let h_norm = impulse_response(&truth.model(), lags).iter().map(|h| h.norm_sqr()).sum::<f64>().sqrt();
    let lms = harness::run_experiment(&ExperimentConfig { method: Method::Lms, lms_mu: 0.02, ..cfg.clone() }).unwrap();
    let plr = harness::run_experiment(&ExperimentConfig { method: Method::PlrDense, ..cfg }).unwrap();
    assert!(lms.final_ir_error < h_norm, "LMS {} vs zero estimate {h_norm}", lms.final_ir_error);
    assert!(plr.final_ir_error < lms.final_ir_error, "dense {} vs LMS {}", plr.final_ir_error, lms.final_ir_error);
}

#[test]
fn impulse_response_error_shrinks_over_a_long_run() {
    let cfg = ExperimentConfig {
        n: 6,
        t: 20_000,
        seed: 3,
        checkpoints: 5,
        delta: 1.0,
        truth: TruthDraw::PositiveReal,
        record_timing: false,
        ..Default::default()
    };
    let report = harness::run_experiment(&cfg).unwrap();
    let errs: Vec<f64> = report.checkpoints.iter().map(|c| c.ir_error).collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!(errs.last().unwrap() < &(0.5 * errs[0]), "{errs:?}");
}

#[test]
fn divergence_is_reported_with_its_step() {
    let cfg = ExperimentConfig { n: 3, t: 50, record_timing: false, ..Default::default() };
    let truth = harness::build_truth(&cfg).unwrap();
    // samples large enough that the covariance overflows within a few steps
    let series = TimeSeries::new(vec![C64::new(1e200, 0.0); 50]).unwrap();
    for method in [Method::PlrDense, Method::Lms] {
        match harness::run_on_series(&ExperimentConfig { method, ..cfg.clone() }, &truth, &series) {
            Err(e @ Error::Diverged { step }) => {
                assert!(step > 1 && step <= 50);
                assert!(e.is_numerical());
            }
            other => panic!("{method}: expected divergence, got {:?}", other.map(|r| r.final_ir_error)),
        }
    }
}

#[test]
fn estimated_impulse_response_is_coordinate_free() {
    let (truth, series) = data(5, 300, 8);
    let (mut fast, mut dense) = exact_pair(&truth, 0.99);
    for &y in series.samples() {
        fast.step(y).unwrap();
        dense.step(y);
    }
    // the dense estimate lives in the true coordinates, so the model built
    // from it must reproduce the square-root filter's estimate
    let model = truth.tib.model(dense.c_hat().clone()).unwrap();
    let h_model = impulse_response(&model, 40);
    let h_fast = fast.estimated_impulse_response(40);
    for (a, b) in h_model.iter().zip(&h_fast) {
        assert!((a - b).norm() <= 1e-6);
    }
}
