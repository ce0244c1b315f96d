//! Experiment harness: synthetic TIB data, identification runs, fast/dense
//! comparisons and scaling benchmarks.
//!
//! Every random draw comes from one [`ChaCha8Rng`] seeded by the config, in
//! a fixed order (eigenvalues, output vector, innovations), so a config pins
//! down the data exactly. Reports are deterministic except for wall-clock
//! timings, which can be switched off with `record_timing = false`.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::displacement::{self, DEFAULT_ALPHA_CAP, DEFAULT_TRUNC_TOL};
use crate::error::{Error, Result};
use crate::io::{self, ModelFile};
use crate::linalg::{self, c64, real, CMatrix, CVector, C64};
use crate::model::{impulse_response, simulate, solve_stein, StateSpaceModel, TimeSeries};
use crate::plr::{plr_init, DensePlrState};
use crate::srdf::{self, SrdfOptions, SrdfSnapshot, SrdfState};
use crate::tib::{tib_from_eigenvalues, TibSystem};

/// Recorded in every report next to the seed.
pub const RNG_NAME: &str = "ChaCha8Rng";

/// Largest order for which comparisons shadow the square root densely.
pub const SHADOW_MAX_N: usize = 64;

const IR_LAG_CAP: usize = 200;
const LONG_LAG_CAP: usize = 20_000;
const MSE_WINDOW: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Srdf,
    SrdfAposteriori,
    PlrDense,
    Lms,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    Exact,
    #[default]
    TibFast,
}

/// How the true output vector is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruthDraw {
    /// Circular Gaussian direction scaled to unit norm.
    #[default]
    UnitNormRandom,
    /// The unit-norm draw, shrunk until `sum_j |c* A^j b| <= 0.9`. Then
    /// `|H(z) - 1| < 1` on the unit circle, which is the positive-real
    /// condition under which the pseudo-linear regression converges to the
    /// truth. Unit-norm draws often violate it.
    PositiveReal,
}

/// Bound on `sum_j |h_j|` enforced by [`TruthDraw::PositiveReal`].
pub const POSITIVE_REAL_MARGIN: f64 = 0.9;

macro_rules! kebab_enum {
    ($ty:ty { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub const NAMES: &'static [&'static str] = &[$($name),+];
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $(Self::$variant => $name),+ })
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok(Self::$variant),)+
                    _ => Err(Error::Validation(format!(
                        "unknown value {s:?}, expected one of {}",
                        Self::NAMES.join(", ")
                    ))),
                }
            }
        }
    };
}

kebab_enum!(Method { Srdf => "srdf", SrdfAposteriori => "srdf-aposteriori", PlrDense => "plr-dense", Lms => "lms" });
kebab_enum!(Init { Exact => "exact", TibFast => "tib-fast" });

/// Pole placement of the true system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EigenSpec {
    /// Exactly these poles, in this order along the diagonal.
    List { values: Vec<C64> },
    /// `n` poles uniform in the disk of the given radius.
    Disk { radius: f64 },
    /// `n` poles uniform in the annulus `inner <= |lambda| <= outer`.
    Annulus { inner: f64, outer: f64 },
}

impl EigenSpec {
    /// Annulus whose width shrinks like `1/n`, keeping `prod |lambda|^2`
    /// near `exp(-2.5)` for every order. The square-root filter needs that
    /// product well above roundoff; see the crate documentation.
    pub fn well_conditioned(n: usize) -> Self {
        let n = n as f64;
        EigenSpec::Annulus { inner: 1.0 - (2.0 / n).min(0.5), outer: 1.0 - (0.5 / n).min(0.25) }
    }
}

impl Default for EigenSpec {
    fn default() -> Self {
        EigenSpec::Disk { radius: 0.9 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    pub data: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub trace_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub eigenvalues: EigenSpec,
    /// TIB scaling `I - A A* = kappa b b*`.
    pub kappa: f64,
    pub delta: f64,
    pub rho: f64,
    /// Innovation standard deviation.
    pub sigma: f64,
    #[serde(rename = "T", alias = "t")]
    pub t: usize,
    pub seed: u64,
    pub method: Method,
    pub init: Init,
    pub truth: TruthDraw,
    pub real_innovations: bool,
    /// LMS step size.
    pub lms_mu: f64,
    /// Number of impulse-response checkpoints spread over the run.
    pub checkpoints: usize,
    pub trunc_tol: f64,
    pub alpha_cap: usize,
    /// See [`SrdfOptions::noise_factor`].
    pub noise_factor: f64,
    pub record_timing: bool,
    pub output: OutputPaths,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 4,
            eigenvalues: EigenSpec::default(),
            kappa: 1.0,
            delta: crate::plr::DEFAULT_DELTA,
            rho: 1.0,
            sigma: 1.0,
            t: 1000,
            seed: 0,
            method: Method::default(),
            init: Init::default(),
            truth: TruthDraw::default(),
            real_innovations: false,
            lms_mu: 0.01,
            checkpoints: 10,
            trunc_tol: DEFAULT_TRUNC_TOL,
            alpha_cap: DEFAULT_ALPHA_CAP,
            noise_factor: srdf::DEFAULT_NOISE_FACTOR,
            record_timing: true,
            output: OutputPaths::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Validation(msg));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        match &self.eigenvalues {
            EigenSpec::List { values } => {
                if values.len() != self.n {
                    return bad(format!("{} eigenvalues given for n = {}", values.len(), self.n));
                }
                if let Some(l) = values.iter().find(|l| !(l.norm() < 1.0 && l.norm() > 0.0)) {
                    return bad(format!("eigenvalue {l} must satisfy 0 < |lambda| < 1"));
                }
            }
            EigenSpec::Disk { radius } => {
                if !(*radius > 0.0 && *radius < 1.0) {
                    return bad(format!("disk radius must lie in (0, 1), got {radius}"));
                }
            }
            EigenSpec::Annulus { inner, outer } => {
                if !(*inner > 0.0 && inner <= outer && *outer < 1.0) {
                    return bad(format!("annulus needs 0 < inner <= outer < 1, got [{inner}, {outer}]"));
                }
            }
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return bad(format!("delta must lie in (0, 1], got {}", self.delta));
        }
        if self.t == 0 {
            return bad("T must be at least 1".into());
        }
        for (name, v) in [("sigma", self.sigma), ("rho", self.rho), ("kappa", self.kappa), ("lms_mu", self.lms_mu)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if self.alpha_cap == 0 || !(self.trunc_tol >= 0.0) || !(self.noise_factor >= 0.0) {
            return bad("alpha_cap must be positive, trunc_tol and noise_factor nonnegative".into());
        }
        Ok(())
    }

    fn srdf_options(&self) -> SrdfOptions {
        SrdfOptions { trunc_tol: self.trunc_tol, alpha_cap: self.alpha_cap, noise_factor: self.noise_factor }
    }
}

/// The true system behind a synthetic experiment.
#[derive(Debug, Clone)]
pub struct TruthModel {
    pub tib: TibSystem,
    pub c: CVector,
}

impl TruthModel {
    pub fn model(&self) -> StateSpaceModel {
        self.tib.model(self.c.clone()).expect("TIB parts are conformal")
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile::from_tib(&self.tib, &self.c)
    }

    pub fn from_file(f: &ModelFile) -> Result<Self> {
        let (tib, c) = f.to_tib()?;
        Ok(Self { tib, c })
    }

    pub fn max_modulus(&self) -> f64 {
        self.tib.eigenvalues().iter().map(|l| l.norm()).fold(0.0, f64::max)
    }
}

fn circular(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    c64(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn draw_truth(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<TruthModel> {
    let eigs = match &cfg.eigenvalues {
        EigenSpec::List { values } => values.clone(),
        EigenSpec::Disk { radius } => (0..cfg.n)
            .map(|_| {
                let r = radius * rng.random::<f64>().sqrt().max(1e-3);
                let theta = std::f64::consts::TAU * rng.random::<f64>();
                C64::from_polar(r, theta)
            })
            .collect(),
        EigenSpec::Annulus { inner, outer } => (0..cfg.n)
            .map(|_| {
                let r = (inner * inner + rng.random::<f64>() * (outer * outer - inner * inner)).sqrt();
                let theta = std::f64::consts::TAU * rng.random::<f64>();
                C64::from_polar(r, theta)
            })
            .collect(),
    };
    let tib = tib_from_eigenvalues(&eigs, cfg.kappa)?.with_sigma2(cfg.sigma * cfg.sigma)?;
    let v = CVector::from_fn(cfg.n, |_, _| circular(rng));
    let norm = v.norm();
    let mut c = v.unscale(norm);
    if cfg.truth == TruthDraw::PositiveReal {
        let max_modulus = eigs.iter().map(|l| l.norm()).fold(0.0, f64::max);
        let h = impulse_response(&tib.model(c.clone())?, lags_for(max_modulus, 1e-13, LONG_LAG_CAP));
        let l1: f64 = h.iter().map(|x| x.norm()).sum();
        if l1 > POSITIVE_REAL_MARGIN {
            c *= real(POSITIVE_REAL_MARGIN / l1);
        }
    }
    Ok(TruthModel { tib, c })
}

/// The true system alone (same draws as [`synthesize`]).
pub fn build_truth(cfg: &ExperimentConfig) -> Result<TruthModel> {
    cfg.validate()?;
    draw_truth(cfg, &mut ChaCha8Rng::seed_from_u64(cfg.seed))
}

/// True system and a simulated prewindowed trajectory carrying its innovations.
pub fn synthesize(cfg: &ExperimentConfig) -> Result<(TruthModel, TimeSeries)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let truth = draw_truth(cfg, &mut rng)?;
    let eps: Vec<C64> = (0..cfg.t)
        .map(|_| {
            if cfg.real_innovations {
                let x: f64 = StandardNormal.sample(&mut rng);
                real(cfg.sigma * x)
            } else {
                circular(&mut rng) * cfg.sigma
            }
        })
        .collect();
    let (series, _) = simulate(&truth.model(), &eps, None)?;
    Ok((truth, series))
}

/// Writes the series as CSV and the truth as a model JSON sidecar.
pub fn generate_dataset(cfg: &ExperimentConfig, data: &Path, truth_path: &Path) -> Result<(TruthModel, TimeSeries)> {
    let (truth, series) = synthesize(cfg)?;
    io::write_series_file(&series, data)?;
    truth.to_file().write(truth_path)?;
    Ok((truth, series))
}

/// `L = ceil(log(1e-6) / log(max |lambda|))`, capped at 200.
pub fn ir_lags(max_modulus: f64) -> usize {
    lags_for(max_modulus, 1e-6, IR_LAG_CAP)
}

fn lags_for(max_modulus: f64, tail: f64, cap: usize) -> usize {
    if max_modulus <= 0.0 {
        return 1;
    }
    let l = (tail.ln() / max_modulus.ln()).ceil();
    if l.is_finite() {
        (l as usize).clamp(1, cap)
    } else {
        cap
    }
}

/// Initial covariance solving `P0 - A P0 A* / delta = rho^2 b b*`, the start
/// under which the displacement is exactly rank one.
pub fn exact_initial_covariance(tib: &TibSystem, delta: f64, rho: f64) -> Result<CMatrix> {
    let lmax = tib.eigenvalues().iter().map(|l| l.norm_sqr()).fold(0.0, f64::max);
    if lmax >= delta * (1.0 - crate::model::STEIN_MARGIN) {
        return Err(Error::Validation(format!(
            "exact initialization needs max |lambda|^2 < delta ({lmax:.6} vs {delta}); use tib-fast"
        )));
    }
    let a = tib.a() * real(delta.sqrt().recip());
    let p = solve_stein(&a, tib.b(), rho * rho, 1e-14 * rho * rho / tib.kappa())?;
    Ok(crate::model::hermitian_part(&p))
}

/// `(rho^2 / kappa) I`, the `O(n)` start's implicit covariance.
pub fn fast_initial_covariance(tib: &TibSystem, rho: f64) -> CMatrix {
    let n = tib.order();
    CMatrix::identity(n, n) * real(rho * rho / tib.kappa())
}

enum Runner {
    Srdf { state: Box<SrdfState>, aposteriori: bool },
    Dense(Box<DensePlrState>),
    Lms { state: Box<DensePlrState>, mu: f64 },
}

impl Runner {
    fn start(cfg: &ExperimentConfig, tib: &TibSystem) -> Result<Self> {
        let n = tib.order();
        let zero = CVector::zeros(n);
        let dense = |p0: &CMatrix| plr_init(tib.a(), tib.b(), p0, &zero, cfg.delta).map(Box::new);
        Ok(match (cfg.method, cfg.init) {
            (Method::Srdf | Method::SrdfAposteriori, init) => {
                let state = match init {
                    Init::Exact => {
                        let p0 = exact_initial_covariance(tib, cfg.delta, cfg.rho)?;
                        srdf::srdf_init_exact_with(tib.a(), tib.b(), &p0, &zero, cfg.delta, None, cfg.srdf_options())?.0
                    }
                    Init::TibFast => srdf::srdf_init_tib_fast_with(tib, cfg.rho, cfg.delta, cfg.srdf_options())?,
                };
                Runner::Srdf { state: Box::new(state), aposteriori: cfg.method == Method::SrdfAposteriori }
            }
            (Method::PlrDense, Init::Exact) => Runner::Dense(dense(&exact_initial_covariance(tib, cfg.delta, cfg.rho)?)?),
            (Method::PlrDense, Init::TibFast) => Runner::Dense(dense(&fast_initial_covariance(tib, cfg.rho))?),
            (Method::Lms, _) => Runner::Lms { state: dense(&fast_initial_covariance(tib, cfg.rho))?, mu: cfg.lms_mu },
        })
    }

    fn step(&mut self, y: C64) -> Result<C64> {
        match self {
            Runner::Srdf { state, aposteriori: false } => state.step(y),
            Runner::Srdf { state, aposteriori: true } => state.step_aposteriori(y),
            Runner::Dense(s) => s.try_step(y),
            Runner::Lms { state, mu } => Ok(state.lms_step(y, *mu)),
        }
    }

    /// As [`Runner::step`], reporting divergence with the step index.
    fn checked_step(&mut self, y: C64, step: usize) -> Result<C64> {
        let eps = self.step(y).map_err(|e| match e {
            Error::NotPositiveDefinite { .. } if matches!(self, Runner::Dense(_)) => Error::Diverged { step },
            other => other,
        })?;
        if eps.re.is_finite() && eps.im.is_finite() {
            Ok(eps)
        } else {
            Err(Error::Diverged { step })
        }
    }

    fn impulse(&self, lags: usize) -> Vec<C64> {
        match self {
            Runner::Srdf { state, .. } => state.estimated_impulse_response(lags),
            Runner::Dense(s) | Runner::Lms { state: s, .. } => s.estimated_impulse_response(lags),
        }
    }

    fn rank(&self) -> Option<usize> {
        match self {
            Runner::Srdf { state, .. } => Some(state.generator().rank()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: usize,
    pub ir_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    pub total_ns: u64,
    pub mean_ns: f64,
    pub median_ns: f64,
    pub p95_ns: f64,
    pub max_ns: u64,
}

impl TimingStats {
    pub fn from_samples(ns: &[u64]) -> Option<Self> {
        if ns.is_empty() {
            return None;
        }
        let mut sorted = ns.to_vec();
        sorted.sort_unstable();
        let total: u64 = sorted.iter().sum();
        Some(Self {
            total_ns: total,
            mean_ns: total as f64 / ns.len() as f64,
            median_ns: quantile(&sorted, 0.5),
            p95_ns: quantile(&sorted, 0.95),
            max_ns: *sorted.last().unwrap(),
        })
    }
}

fn quantile(sorted: &[u64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    let w = pos - lo as f64;
    sorted[lo] as f64 * (1.0 - w) + sorted[hi] as f64 * w
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub rng: String,
    /// Prediction residuals `e[1..=T]`.
    pub residuals: Vec<C64>,
    pub ir_lags: usize,
    pub checkpoints: Vec<Checkpoint>,
    pub final_ir_error: f64,
    /// `||c_hat - c||` in TIB coordinates, from the full impulse response.
    pub final_coefficient_error: f64,
    /// Mean `|e[t]|^2` over the last `min(100, T)` steps.
    pub final_prediction_mse: f64,
    /// Mean `|e[t] - eps[t]|^2` over the same window, when innovations are known.
    pub final_excess_mse: Option<f64>,
    /// Generator rank after each step (square-root methods only).
    pub rank_trace: Vec<usize>,
    pub timing: Option<TimingStats>,
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Largest absolute difference over all numeric, non-timing fields;
    /// infinite if the shapes differ.
    pub fn max_deviation(&self, other: &Self) -> f64 {
        if self.residuals.len() != other.residuals.len()
            || self.checkpoints.len() != other.checkpoints.len()
            || self.rank_trace != other.rank_trace
            || self.ir_lags != other.ir_lags
            || self.final_excess_mse.is_some() != other.final_excess_mse.is_some()
        {
            return f64::INFINITY;
        }
        let mut dev: f64 = 0.0;
        for (a, b) in self.residuals.iter().zip(&other.residuals) {
            dev = dev.max((a - b).norm());
        }
        for (a, b) in self.checkpoints.iter().zip(&other.checkpoints) {
            if a.t != b.t {
                return f64::INFINITY;
            }
            dev = dev.max((a.ir_error - b.ir_error).abs());
        }
        dev = dev
            .max((self.final_ir_error - other.final_ir_error).abs())
            .max((self.final_coefficient_error - other.final_coefficient_error).abs())
            .max((self.final_prediction_mse - other.final_prediction_mse).abs());
        if let (Some(a), Some(b)) = (self.final_excess_mse, other.final_excess_mse) {
            dev = dev.max((a - b).abs());
        }
        dev
    }

    /// Per-step trace as CSV: `t,eps_re,eps_im,rank`.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "eps_re", "eps_im", "rank"])?;
        for (i, e) in self.residuals.iter().enumerate() {
            let rank = self.rank_trace.get(i).map(|r| r.to_string()).unwrap_or_default();
            w.write_record([(i + 1).to_string(), e.re.to_string(), e.im.to_string(), rank])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn l2_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

fn checkpoint_times(t: usize, count: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (1..=count.max(1)).map(|k| (k * t).div_ceil(count.max(1))).collect();
    out.dedup();
    out
}

/// Runs the configured estimator on `series` against a known truth.
pub fn run_on_series(cfg: &ExperimentConfig, truth: &TruthModel, series: &TimeSeries) -> Result<MetricsReport> {
    run_inner(cfg, truth, series).map(|(report, _)| report)
}

/// As [`run_on_series`], also returning the final filter state for the
/// square-root methods.
pub fn run_with_snapshot(
    cfg: &ExperimentConfig,
    truth: &TruthModel,
    series: &TimeSeries,
) -> Result<(MetricsReport, Option<SrdfSnapshot>)> {
    let (report, runner) = run_inner(cfg, truth, series)?;
    let snap = match runner {
        Runner::Srdf { state, .. } => Some(state.snapshot()),
        _ => None,
    };
    Ok((report, snap))
}

fn run_inner(cfg: &ExperimentConfig, truth: &TruthModel, series: &TimeSeries) -> Result<(MetricsReport, Runner)> {
    cfg.validate()?;
    if truth.tib.order() != cfg.n {
        return Err(Error::Dimension(format!("truth has order {}, config says {}", truth.tib.order(), cfg.n)));
    }
    let model = truth.model();
    let lags = ir_lags(truth.max_modulus());
    let long = lags_for(truth.max_modulus(), 1e-13, LONG_LAG_CAP);
    let h_true = impulse_response(&model, long);
    let marks = checkpoint_times(series.len(), cfg.checkpoints);

    let mut runner = Runner::start(cfg, &truth.tib)?;
    let mut residuals = Vec::with_capacity(series.len());
    let mut ranks = Vec::new();
    let mut times = Vec::new();
    let mut checkpoints = Vec::with_capacity(marks.len());
    let mut next_mark = marks.iter().peekable();
    for (i, &y) in series.samples().iter().enumerate() {
        let started = Instant::now();
        let eps = runner.checked_step(y, i + 1)?;
        if cfg.record_timing {
            times.push(started.elapsed().as_nanos() as u64);
        }
        residuals.push(eps);
        if let Some(r) = runner.rank() {
            ranks.push(r);
        }
        if next_mark.peek() == Some(&&(i + 1)) {
            next_mark.next();
            checkpoints.push(Checkpoint { t: i + 1, ir_error: l2_diff(&runner.impulse(lags), &h_true[..lags]) });
        }
    }
    let h_est = runner.impulse(long);
    let window = series.len().min(MSE_WINDOW);
    let tail = &residuals[residuals.len() - window..];
    let excess = series.innovations().map(|eps| {
        let eps_tail = &eps[eps.len() - window..];
        tail.iter().zip(eps_tail).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / window as f64
    });
    let report = MetricsReport {
        config: cfg.clone(),
        seed: cfg.seed,
        rng: RNG_NAME.into(),
        ir_lags: lags,
        final_ir_error: l2_diff(&h_est[..lags], &h_true[..lags]),
        final_coefficient_error: truth.tib.kappa().sqrt() * l2_diff(&h_est, &h_true),
        final_prediction_mse: tail.iter().map(|e| e.norm_sqr()).sum::<f64>() / window as f64,
        final_excess_mse: excess,
        residuals,
        checkpoints,
        rank_trace: ranks,
        timing: TimingStats::from_samples(&times),
    };
    Ok((report, runner))
}

/// Synthesizes data from the config, runs it, and writes whatever outputs
/// the config names.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricsReport> {
    let (truth, series) = synthesize(cfg)?;
    let report = run_on_series(cfg, &truth, &series)?;
    write_outputs(cfg, &truth, &series, &report)?;
    Ok(report)
}

fn write_outputs(cfg: &ExperimentConfig, truth: &TruthModel, series: &TimeSeries, report: &MetricsReport) -> Result<()> {
    let out = &cfg.output;
    if let Some(p) = &out.data {
        io::write_series_file(series, p)?;
    }
    if let Some(p) = &out.truth {
        truth.to_file().write(p)?;
    }
    if let Some(p) = &out.report {
        std::fs::write(p, report.to_json()?)?;
    }
    if let Some(p) = &out.trace_csv {
        report.write_trace_csv(std::fs::File::create(p)?)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSummary {
    pub n: usize,
    pub delta: f64,
    pub method: Method,
    pub init: Init,
    /// `|e_fast - e_dense| / (1 + |e_dense|)` over all steps.
    pub residual_max: f64,
    pub residual_median: f64,
    /// `||h_fast - h_dense||` at the checkpoints.
    pub ir_max: f64,
    pub ir_median: f64,
    /// `||R^-1 (P - A P A* / delta) R^-* - V D V*||_F` at the checkpoints,
    /// with `R` shadowed densely and `P = R R*`. Empty above [`SHADOW_MAX_N`].
    pub displacement_residuals: Vec<f64>,
    /// `residual_max / (1 - delta)`; absent at `delta = 1`.
    pub measured_constant: Option<f64>,
}

/// Runs the square-root filter (with the configured start) and the dense
/// filter with the exact start on identical data.
pub fn compare_fast_slow(cfg: &ExperimentConfig) -> Result<CompareSummary> {
    let (truth, series) = synthesize(cfg)?;
    compare_on_series(cfg, &truth, &series)
}

pub fn compare_on_series(cfg: &ExperimentConfig, truth: &TruthModel, series: &TimeSeries) -> Result<CompareSummary> {
    cfg.validate()?;
    let tib = &truth.tib;
    let n = tib.order();
    let aposteriori = cfg.method == Method::SrdfAposteriori;
    let delta = cfg.delta;
    let zero = CVector::zeros(n);
    let p_exact = exact_initial_covariance(tib, delta, cfg.rho)?;
    let mut dense = plr_init(tib.a(), tib.b(), &p_exact, &zero, delta)?;
    let (mut fast, mut r) = match cfg.init {
        Init::Exact => srdf::srdf_init_exact_with(tib.a(), tib.b(), &p_exact, &zero, delta, None, cfg.srdf_options())?,
        Init::TibFast => {
            let s = srdf::srdf_init_tib_fast_with(tib, cfg.rho, delta, cfg.srdf_options())?;
            (s, CMatrix::identity(n, n) * real(cfg.rho / tib.kappa().sqrt()))
        }
    };
    let shadow = n <= SHADOW_MAX_N;
    let lags = ir_lags(truth.max_modulus());
    let marks = checkpoint_times(series.len(), cfg.checkpoints);
    let mut res_dev = Vec::with_capacity(series.len());
    let mut ir_dev = Vec::new();
    let mut disp = Vec::new();
    let mut next_mark = marks.iter().peekable();
    for (i, &y) in series.samples().iter().enumerate() {
        let (ef, es) = if aposteriori {
            (fast.step_aposteriori(y)?, dense.step_aposteriori(y)?)
        } else {
            (fast.step(y)?, dense.step(y))
        };
        res_dev.push((ef - es).norm() / (1.0 + es.norm()));
        if shadow {
            // R[t] = R[t-1] W^-1 with W^-1 = sqrt(delta) F
            let w = fast.last_w().expect("stepped");
            let f = w.factor().to_dense() * real(delta.sqrt());
            r = &r * f;
        }
        if next_mark.peek() == Some(&&(i + 1)) {
            next_mark.next();
            ir_dev.push(l2_diff(&fast.estimated_impulse_response(lags), &dense.estimated_impulse_response(lags)));
            if shadow {
                disp.push(displacement_residual(&r, tib.a(), delta, fast.generator())?);
            }
        }
    }
    let residual_max = res_dev.iter().copied().fold(0.0, f64::max);
    Ok(CompareSummary {
        n,
        delta,
        method: cfg.method,
        init: cfg.init,
        residual_max,
        residual_median: median(res_dev),
        ir_max: ir_dev.iter().copied().fold(0.0, f64::max),
        ir_median: median(ir_dev),
        displacement_residuals: disp,
        measured_constant: (delta < 1.0).then(|| residual_max / (1.0 - delta)),
    })
}

/// `||R^-1 (P - A P A* / delta) R^-* - V D V*||_F` with `P = R R*`.
pub fn displacement_residual(r: &CMatrix, a: &CMatrix, delta: f64, gen: &displacement::EvdGenerator) -> Result<f64> {
    let p = r * r.adjoint();
    let d = displacement::dense_displacement(&p, a, delta);
    let rinv = r.clone().try_inverse().ok_or(Error::NotPositiveDefinite { what: "shadow square root" })?;
    Ok(linalg::frob_diff(&(&rinv * d * rinv.adjoint()), &gen.to_dense()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    pub srdf_median_ns: f64,
    pub dense_median_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchTable {
    pub steps: usize,
    pub rows: Vec<BenchRow>,
    /// Least-squares slope of `log(time)` against `log(n)`.
    pub srdf_slope: Option<f64>,
    pub dense_slope: Option<f64>,
}

/// Median per-step time of both filters on the same synthetic data.
///
/// Each order gets poles from [`EigenSpec::well_conditioned`] and the `O(n)`
/// start; the dense filter starts from the matching scaled identity.
pub fn bench_scaling(sizes: &[usize], steps: usize, seed: u64) -> Result<BenchTable> {
    if sizes.is_empty() || steps == 0 {
        return Err(Error::Validation("need at least one size and one step".into()));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) || sizes[0] == 0 {
        return Err(Error::Validation("sizes must be positive and strictly ascending".into()));
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let cfg = ExperimentConfig { n, t: steps, seed, eigenvalues: EigenSpec::well_conditioned(n), ..ExperimentConfig::default() };
        let (truth, series) = synthesize(&cfg)?;
        let mut fast = srdf::srdf_init_tib_fast(&truth.tib, cfg.rho, cfg.delta)?;
        let p0 = fast_initial_covariance(&truth.tib, cfg.rho);
        let mut dense = plr_init(truth.tib.a(), truth.tib.b(), &p0, &CVector::zeros(n), cfg.delta)?;
        let mut tf = Vec::with_capacity(steps);
        let mut td = Vec::with_capacity(steps);
        for &y in series.samples() {
            let s = Instant::now();
            fast.step(y)?;
            tf.push(s.elapsed().as_nanos() as f64);
            let s = Instant::now();
            std::hint::black_box(dense.step(y));
            td.push(s.elapsed().as_nanos() as f64);
        }
        rows.push(BenchRow { n, srdf_median_ns: median(tf), dense_median_ns: median(td) });
    }
    let fit = |f: fn(&BenchRow) -> f64| {
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| ((r.n as f64).ln(), f(r).max(1.0).ln())).collect();
        loglog_slope(&pts)
    };
    Ok(BenchTable { steps, srdf_slope: fit(|r| r.srdf_median_ns), dense_slope: fit(|r| r.dense_median_ns), rows })
}

/// Ordinary least-squares slope; `None` with fewer than two distinct abscissae.
pub fn loglog_slope(pts: &[(f64, f64)]) -> Option<f64> {
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
