//! Retrodiction of the binding onset `t0` from gel measurements.
//!
//! Three estimators are provided:
//!
//! * [`two_point_estimate`]: closed-form inversion of the pseudo-first-order
//!   law from any pair of instants.
//! * [`fit_pseudo_first`]: least squares over all aliquots for `(S0 k, t0)`.
//! * [`fit_second_order`]: least squares on the exact second-order law for
//!   `(k, t0)` with known `S0`, or `(k, S0, t0)`.
//!
//! Fits run in local time measured from the earliest usable gel time, so a
//! common shift of every gel time shifts `t0_hat` and nothing else. Their
//! `ci_t0` is the linearized (Student-t) interval; [`bootstrap_ci`] gives
//! the parametric-bootstrap alternative.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::assay::{simulate_counts, AliquotMeasurement};
use crate::error::{require_positive, Error, Result};
use crate::kinetics::{ps_second_order_exact, ReactionParams};
use crate::lsq::{self, Problem};
use crate::seed::mix_seed;

/// Relative floor of the Poisson weights, as a fraction of `p0`.
const WEIGHT_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    #[default]
    Unweighted,
    /// `1 / max(ps, p0 * 1e-6)`, normalized by `p0`.
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub confidence: f64,
    pub weighting: Weighting,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { confidence: 0.95, weighting: Weighting::Unweighted }
    }
}

impl FitOptions {
    pub fn with_confidence(confidence: f64) -> Self {
        Self { confidence, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FittedRates {
    PseudoFirst { rate: f64 },
    SecondOrder { k: f64, s0: f64, s0_fitted: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrodictionResult {
    pub t0_hat: f64,
    pub rates: FittedRates,
    pub p0: f64,
    /// `|r|` of the (weighted) residuals in units of `p0`.
    pub residual_norm: f64,
    pub ci_t0: (f64, f64),
    pub confidence: f64,
    pub n_points: usize,
    pub iterations: usize,
}

impl RetrodictionResult {
    pub fn model_tag(&self) -> &'static str {
        match self.rates {
            FittedRates::PseudoFirst { .. } => "pseudo_first",
            FittedRates::SecondOrder { s0_fitted: false, .. } => "second_order_known_s0",
            FittedRates::SecondOrder { s0_fitted: true, .. } => "second_order",
        }
    }

    /// Fitted pseudo-first-order rate `S0 k`, s^-1.
    pub fn rate_hat(&self) -> f64 {
        match self.rates {
            FittedRates::PseudoFirst { rate } => rate,
            FittedRates::SecondOrder { k, s0, .. } => k * s0,
        }
    }

    /// Named estimates, `t0` first.
    pub fn estimates(&self) -> Vec<(&'static str, f64)> {
        let mut out = vec![("t0", self.t0_hat)];
        match self.rates {
            FittedRates::PseudoFirst { rate } => out.push(("rate", rate)),
            FittedRates::SecondOrder { k, s0, s0_fitted } => {
                out.push(("k", k));
                if s0_fitted {
                    out.push(("s0", s0));
                }
            }
        }
        out
    }

    /// Complex concentration predicted by the fitted model.
    pub fn predict(&self, t: f64) -> f64 {
        let dt = t - self.t0_hat;
        if dt <= 0.0 {
            return 0.0;
        }
        match self.rates {
            FittedRates::PseudoFirst { rate } => -self.p0 * (-rate * dt).exp_m1(),
            FittedRates::SecondOrder { k, s0, .. } => {
                let params = ReactionParams { p0: self.p0, s0, k, t0: self.t0_hat };
                ps_second_order_exact(&params, t).unwrap_or(f64::NAN)
            }
        }
    }
}

/// `ln((p0 - ps) / p0)` for `0 <= ps < p0`.
fn log_unbound_fraction(ps: f64, p0: f64) -> Result<f64> {
    if !ps.is_finite() || ps < 0.0 {
        return Err(Error::Input(format!("ps estimate must be finite and >= 0, got {ps}")));
    }
    if ps >= p0 {
        return Err(Error::Estimation(format!(
            "ps estimate {ps} reaches or exceeds p0 = {p0}; the measurement is saturated"
        )));
    }
    Ok((-ps / p0).ln_1p())
}

/// Closed-form `(S0 k, t0)` from two aliquots under pseudo-first-order kinetics.
pub fn two_point_estimate(
    m1: &AliquotMeasurement,
    m2: &AliquotMeasurement,
    p0: f64,
) -> Result<(f64, f64)> {
    require_positive("p0", p0)?;
    let (t1, t2) = (m1.gel_time, m2.gel_time);
    if !(t1.is_finite() && t2.is_finite() && t1 < t2) {
        return Err(Error::Input(format!("gel times must satisfy t1 < t2, got {t1} and {t2}")));
    }
    let l1 = log_unbound_fraction(m1.ps_estimate, p0)?;
    let l2 = log_unbound_fraction(m2.ps_estimate, p0)?;
    let rate = (l1 - l2) / (t2 - t1);
    if rate.is_nan() || rate <= 0.0 {
        return Err(Error::Estimation(format!(
            "apparent rate {rate} is not positive; the two aliquots are indistinguishable \
             or decreasing"
        )));
    }
    Ok((rate, t1 + l1 / rate))
}

/// Finite, sorted, duplicate-free aliquots.
fn usable(measurements: &[AliquotMeasurement], min_points: usize) -> Result<Vec<AliquotMeasurement>> {
    let mut pts: Vec<AliquotMeasurement> = measurements
        .iter()
        .copied()
        .filter(|m| m.gel_time.is_finite() && m.ps_estimate.is_finite())
        .collect();
    pts.sort_by(|a, b| a.gel_time.total_cmp(&b.gel_time));
    if pts.windows(2).any(|w| w[0].gel_time == w[1].gel_time) {
        return Err(Error::Input("duplicate gel times".into()));
    }
    if pts.len() < min_points {
        return Err(Error::Input(format!(
            "need at least {min_points} usable measurements, got {}",
            pts.len()
        )));
    }
    Ok(pts)
}

fn check_confidence(confidence: f64) -> Result<()> {
    if confidence > 0.0 && confidence < 1.0 {
        Ok(())
    } else {
        Err(Error::Input(format!("confidence must lie in (0, 1), got {confidence}")))
    }
}

fn weights(pts: &[AliquotMeasurement], p0: f64, weighting: Weighting) -> Vec<f64> {
    pts.iter()
        .map(|m| match weighting {
            Weighting::Unweighted => 1.0,
            Weighting::Poisson => (p0 / m.ps_estimate.max(p0 * WEIGHT_FLOOR)).sqrt(),
        })
        .collect()
}

/// Two-point start on the first and last aliquots usable in closed form,
/// falling back to progressively narrower pairs.
fn initial_pseudo_first(pts: &[AliquotMeasurement], p0: f64) -> Result<(f64, f64)> {
    let closed: Vec<&AliquotMeasurement> =
        pts.iter().filter(|m| m.ps_estimate >= 0.0 && m.ps_estimate < p0).collect();
    if closed.len() < 2 {
        return Err(Error::Estimation(
            "fewer than two aliquots below saturation; cannot initialize the fit".into(),
        ));
    }
    let n = closed.len();
    let first_err = match two_point_estimate(closed[0], closed[n - 1], p0) {
        Ok(est) => return Ok(est),
        Err(e) => e,
    };
    for gap in (1..n - 1).rev() {
        for i in 0..n - gap {
            if let Ok(est) = two_point_estimate(closed[i], closed[i + gap], p0) {
                return Ok(est);
            }
        }
    }
    Err(first_err)
}

fn linearized_ci(
    t0_hat: f64,
    t0_index: usize,
    residuals: &DVector<f64>,
    jacobian: &DMatrix<f64>,
    confidence: f64,
) -> Result<(f64, f64)> {
    let n = residuals.len();
    let p = jacobian.ncols();
    if n <= p {
        return Ok((t0_hat, t0_hat));
    }
    let dof = (n - p) as f64;
    let sigma2 = residuals.norm_squared() / dof;
    let cov = lsq::inverse_normal_matrix(jacobian)
        .ok_or_else(|| Error::Indeterminate("singular information matrix at the optimum".into()))?;
    let quantile = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::Estimation(format!("Student-t quantile: {e}")))?
        .inverse_cdf(0.5 + 0.5 * confidence);
    let half = quantile * (sigma2 * cov[(t0_index, t0_index)]).sqrt();
    Ok((t0_hat - half, t0_hat + half))
}

struct PseudoFirstProblem {
    times: Vec<f64>,
    observed: Vec<f64>,
    weights: Vec<f64>,
}

impl Problem for PseudoFirstProblem {
    // x = [rate, t0_local]; residuals in units of p0
    fn residuals(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.times.len(),
            self.times.iter().zip(&self.observed).zip(&self.weights).map(|((t, y), w)| {
                let dt = t - x[1];
                let model = if dt > 0.0 { -(-x[0] * dt).exp_m1() } else { 0.0 };
                w * (model - y)
            }),
        )
    }

    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(self.times.len(), 2);
        for (i, (t, w)) in self.times.iter().zip(&self.weights).enumerate() {
            let dt = t - x[1];
            if dt > 0.0 {
                let decay = (-x[0] * dt).exp();
                jac[(i, 0)] = w * dt * decay;
                jac[(i, 1)] = -w * x[0] * decay;
            }
        }
        jac
    }

    fn feasible(&self, x: &[f64]) -> bool {
        x[0] > 0.0 && x.iter().all(|v| v.is_finite())
    }
}

pub fn fit_pseudo_first(
    measurements: &[AliquotMeasurement],
    p0: f64,
    confidence: f64,
) -> Result<RetrodictionResult> {
    fit_pseudo_first_with(measurements, p0, &FitOptions::with_confidence(confidence))
}

pub fn fit_pseudo_first_with(
    measurements: &[AliquotMeasurement],
    p0: f64,
    options: &FitOptions,
) -> Result<RetrodictionResult> {
    require_positive("p0", p0)?;
    check_confidence(options.confidence)?;
    let pts = usable(measurements, 2)?;
    let (rate0, t00) = initial_pseudo_first(&pts, p0)?;

    let t_ref = pts[0].gel_time;
    let problem = PseudoFirstProblem {
        times: pts.iter().map(|m| m.gel_time - t_ref).collect(),
        observed: pts.iter().map(|m| m.ps_estimate / p0).collect(),
        weights: weights(&pts, p0, options.weighting),
    };
    let sol = lsq::solve(&problem, vec![rate0, t00 - t_ref], &[rate0, 1.0 / rate0])?;
    let t0_hat = t_ref + sol.params[1];
    Ok(RetrodictionResult {
        t0_hat,
        rates: FittedRates::PseudoFirst { rate: sol.params[0] },
        p0,
        residual_norm: sol.residuals.norm(),
        ci_t0: linearized_ci(t0_hat, 1, &sol.residuals, &sol.jacobian, options.confidence)?,
        confidence: options.confidence,
        n_points: pts.len(),
        iterations: sol.iterations,
    })
}

struct SecondOrderProblem {
    p0: f64,
    known_s0: Option<f64>,
    /// Fitted `s0` must stay above the largest observed complex.
    s0_floor: f64,
    times: Vec<f64>,
    observed: Vec<f64>,
    weights: Vec<f64>,
}

impl SecondOrderProblem {
    /// x = [k, t0_local] or [k, s0, t0_local]
    fn unpack(&self, x: &[f64]) -> (f64, f64, f64) {
        match self.known_s0 {
            Some(s0) => (x[0], s0, x[1]),
            None => (x[0], x[1], x[2]),
        }
    }

    fn model(&self, k: f64, s0: f64, t0: f64, t: f64) -> f64 {
        let params = ReactionParams { p0: self.p0, s0, k, t0 };
        ps_second_order_exact(&params, t).unwrap_or(f64::NAN)
    }
}

impl Problem for SecondOrderProblem {
    fn residuals(&self, x: &[f64]) -> DVector<f64> {
        let (k, s0, t0) = self.unpack(x);
        DVector::from_iterator(
            self.times.len(),
            self.times.iter().zip(&self.observed).zip(&self.weights).map(|((&t, y), w)| {
                w * (self.model(k, s0, t0, t) / self.p0 - y)
            }),
        )
    }

    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let (k, s0, t0) = self.unpack(x);
        let cols = x.len();
        let mut jac = DMatrix::zeros(self.times.len(), cols);
        let h = 1e-6 * s0;
        for (i, (&t, w)) in self.times.iter().zip(&self.weights).enumerate() {
            let dt = t - t0;
            if dt <= 0.0 {
                continue;
            }
            let ps = self.model(k, s0, t0, t);
            // d[PS]/dt of the rate law; PS depends on k and dt only through k*dt
            let slope = k * (self.p0 - ps) * (s0 - ps);
            jac[(i, 0)] = w * dt * slope / k / self.p0;
            jac[(i, cols - 1)] = -w * slope / self.p0;
            if self.known_s0.is_none() {
                let up = self.model(k, s0 + h, t0, t);
                let down = self.model(k, s0 - h, t0, t);
                jac[(i, 1)] = w * (up - down) / (2.0 * h) / self.p0;
            }
        }
        jac
    }

    fn feasible(&self, x: &[f64]) -> bool {
        let (k, s0, _) = self.unpack(x);
        x.iter().all(|v| v.is_finite()) && k > 0.0 && s0 > self.s0_floor
    }
}

pub fn fit_second_order(
    measurements: &[AliquotMeasurement],
    p0: f64,
    s0: Option<f64>,
    confidence: f64,
) -> Result<RetrodictionResult> {
    fit_second_order_with(measurements, p0, s0, &FitOptions::with_confidence(confidence))
}

pub fn fit_second_order_with(
    measurements: &[AliquotMeasurement],
    p0: f64,
    s0: Option<f64>,
    options: &FitOptions,
) -> Result<RetrodictionResult> {
    require_positive("p0", p0)?;
    if let Some(s0) = s0 {
        require_positive("s0", s0)?;
    }
    check_confidence(options.confidence)?;
    let pts = usable(measurements, if s0.is_some() { 2 } else { 3 })?;

    let ps_max = pts.iter().map(|m| m.ps_estimate).fold(0.0, f64::max);
    let s0_init = match s0 {
        Some(v) => v,
        None if ps_max > 0.0 => 2.0 * ps_max,
        None => {
            return Err(Error::Estimation(
                "no aliquot shows bound photolyase; s0 cannot be initialized".into(),
            ))
        }
    };
    let (rate0, t00) = match fit_pseudo_first_with(&pts, p0, options) {
        Ok(fit) => (fit.rate_hat(), fit.t0_hat),
        Err(_) => initial_pseudo_first(&pts, p0)?,
    };
    let k0 = rate0 / s0_init;

    let t_ref = pts[0].gel_time;
    let problem = SecondOrderProblem {
        p0,
        known_s0: s0,
        s0_floor: if s0.is_some() { 0.0 } else { ps_max },
        times: pts.iter().map(|m| m.gel_time - t_ref).collect(),
        observed: pts.iter().map(|m| m.ps_estimate / p0).collect(),
        weights: weights(&pts, p0, options.weighting),
    };
    let (x0, scales) = match s0 {
        Some(_) => (vec![k0, t00 - t_ref], vec![k0, 1.0 / rate0]),
        None => (vec![k0, s0_init, t00 - t_ref], vec![k0, s0_init, 1.0 / rate0]),
    };
    let sol = lsq::solve(&problem, x0, &scales)?;
    let (k, s0_hat, t0_local) = problem.unpack(&sol.params);
    let t0_hat = t_ref + t0_local;
    let t0_index = sol.params.len() - 1;
    Ok(RetrodictionResult {
        t0_hat,
        rates: FittedRates::SecondOrder { k, s0: s0_hat, s0_fitted: s0.is_none() },
        p0,
        residual_norm: sol.residuals.norm(),
        ci_t0: linearized_ci(t0_hat, t0_index, &sol.residuals, &sol.jacobian, options.confidence)?,
        confidence: options.confidence,
        n_points: pts.len(),
        iterations: sol.iterations,
    })
}

/// Counting noise used to regenerate bootstrap datasets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CountingNoise {
    Poisson { counts_per_molar: f64 },
    /// Resamples equal the fitted curve exactly.
    Noiseless,
}

impl CountingNoise {
    /// Calibration inferred from the mean total band count, `mean(b + u) / p0`.
    /// Aliquots without count data give [`CountingNoise::Noiseless`].
    pub fn infer(measurements: &[AliquotMeasurement], p0: f64) -> Self {
        let totals: Vec<f64> = measurements
            .iter()
            .filter(|m| m.total_counts() > 0)
            .map(|m| m.total_counts() as f64)
            .collect();
        if totals.is_empty() {
            Self::Noiseless
        } else {
            let mean = totals.iter().sum::<f64>() / totals.len() as f64;
            Self::Poisson { counts_per_molar: mean / p0 }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamInterval {
    pub name: &'static str,
    pub estimate: f64,
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapSummary {
    pub base: RetrodictionResult,
    pub intervals: Vec<ParamInterval>,
    pub confidence: f64,
    pub n_resamples: usize,
    pub failed: usize,
}

impl BootstrapSummary {
    pub fn interval(&self, name: &str) -> Option<&ParamInterval> {
        self.intervals.iter().find(|p| p.name == name)
    }

    pub fn t0(&self) -> &ParamInterval {
        &self.intervals[0]
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Parametric bootstrap: regenerate counts from the fitted curve, refit,
/// and take percentile intervals at `(1 ± confidence) / 2`.
///
/// Resample `r` draws its counts from `mix_seed(seed, r)`; results do not
/// depend on thread scheduling.
pub fn bootstrap_ci<F>(
    measurements: &[AliquotMeasurement],
    fit_fn: F,
    noise: CountingNoise,
    n_resamples: usize,
    confidence: f64,
    seed: u64,
) -> Result<BootstrapSummary>
where
    F: Fn(&[AliquotMeasurement]) -> Result<RetrodictionResult> + Sync,
{
    if n_resamples < 100 {
        return Err(Error::Input(format!("n_resamples must be >= 100, got {n_resamples}")));
    }
    check_confidence(confidence)?;
    let base = fit_fn(measurements)?;
    let gel_times: Vec<f64> = measurements
        .iter()
        .filter(|m| m.gel_time.is_finite())
        .map(|m| m.gel_time)
        .collect();
    let predicted: Vec<f64> = gel_times.iter().map(|&t| base.predict(t)).collect();

    let fits: Vec<Option<Vec<f64>>> = (0..n_resamples)
        .into_par_iter()
        .map(|r| {
            let data = match noise {
                CountingNoise::Poisson { counts_per_molar } => simulate_counts(
                    &gel_times,
                    &predicted,
                    base.p0,
                    counts_per_molar,
                    mix_seed(seed, r as u64),
                )
                .ok()?,
                CountingNoise::Noiseless => gel_times
                    .iter()
                    .zip(&predicted)
                    .map(|(&t, &ps)| AliquotMeasurement::exact(t, ps, base.p0))
                    .collect(),
            };
            let fit = fit_fn(&data).ok()?;
            Some(fit.estimates().into_iter().map(|(_, v)| v).collect())
        })
        .collect();

    let failed = fits.iter().filter(|f| f.is_none()).count();
    if failed * 5 > n_resamples {
        return Err(Error::Uncertainty { failed, total: n_resamples });
    }
    let ok: Vec<Vec<f64>> = fits.into_iter().flatten().collect();
    let (q_lo, q_hi) = (0.5 * (1.0 - confidence), 0.5 * (1.0 + confidence));
    let intervals = base
        .estimates()
        .into_iter()
        .enumerate()
        .map(|(j, (name, estimate))| {
            let mut column: Vec<f64> = ok.iter().map(|v| v[j]).collect();
            column.sort_by(f64::total_cmp);
            ParamInterval { name, estimate, low: quantile(&column, q_lo), high: quantile(&column, q_hi) }
        })
        .collect();
    Ok(BootstrapSummary { base, intervals, confidence, n_resamples, failed })
}
