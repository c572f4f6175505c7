//! Sensitivity bounds for the four released PLS quantities and Gaussian noise
//! calibration.
//!
//! The suprema in the sensitivity bounds are estimated from the observed
//! residuals (largest row norm, largest absolute response). This is a
//! data-dependent estimate, so the worst-case guarantee only holds if the
//! population of possible rows is bounded by what was observed.

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(epsilon, delta)` spent on one mechanism invocation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    epsilon: f64,
    delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::Argument(format!(
                "epsilon must be positive and finite, got {epsilon}"
            )));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Argument(format!(
                "delta must lie in (0, 1), got {delta}"
            )));
        }
        Ok(Self { epsilon, delta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseTarget {
    Weights,
    Scores,
    XLoadings,
    YLoading,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMethod {
    Classic,
    Analytic,
}

/// Sensitivity and noise scale for one released vector or scalar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseCalibration {
    pub target: NoiseTarget,
    pub sensitivity: f64,
    pub sigma: f64,
    pub method: CalibrationMethod,
}

/// Largest residual row norm and largest absolute residual response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleBounds {
    pub max_row_norm: f64,
    pub y_max_abs: f64,
}

pub fn sample_bounds(e: ArrayView2<'_, f64>, f: ArrayView1<'_, f64>) -> Result<SampleBounds> {
    if e.nrows() == 0 || e.ncols() == 0 || f.is_empty() {
        return Err(Error::Degenerate(
            "sample bounds need a nonempty residual matrix and response".into(),
        ));
    }
    if e.nrows() != f.len() {
        return Err(Error::Shape(format!(
            "residual matrix has {} rows but response has {} entries",
            e.nrows(),
            f.len()
        )));
    }
    let max_row_norm = e
        .rows()
        .into_iter()
        .map(|r| r.dot(&r).sqrt())
        .fold(0.0, f64::max);
    let y_max_abs = f.iter().map(|v| v.abs()).fold(0.0, f64::max);
    Ok(SampleBounds {
        max_row_norm,
        y_max_abs,
    })
}

/// Bound on the change of the covariance `E^T f` when one row is removed.
pub fn sensitivity_weights(b: &SampleBounds) -> f64 {
    b.y_max_abs * b.max_row_norm
}

/// Bound on one score entry `x^T w` with `|w| = 1`.
pub fn sensitivity_scores(b: &SampleBounds) -> f64 {
    b.max_row_norm
}

/// Bound on the change of `E^T t` for a unit score vector `t`.
pub fn sensitivity_xloadings(b: &SampleBounds) -> f64 {
    b.max_row_norm
}

/// Bound on the change of `f^T t` for a unit score vector `t`.
pub fn sensitivity_yloading(b: &SampleBounds) -> f64 {
    b.y_max_abs
}

pub fn sensitivity(target: NoiseTarget, b: &SampleBounds) -> f64 {
    match target {
        NoiseTarget::Weights => sensitivity_weights(b),
        NoiseTarget::Scores => sensitivity_scores(b),
        NoiseTarget::XLoadings => sensitivity_xloadings(b),
        NoiseTarget::YLoading => sensitivity_yloading(b),
    }
}

/// Result of the classic closed-form calibration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicSigma {
    pub sigma: f64,
    /// `false` when `epsilon > 1`, where the closed form no longer guarantees
    /// `(epsilon, delta)`-DP. The value is then advisory only.
    pub guaranteed: bool,
}

/// `sigma = delta_f * sqrt(2 ln(1.25 / delta)) / epsilon`.
pub fn classic_gaussian_sigma(delta_f: f64, budget: &PrivacyBudget) -> Result<ClassicSigma> {
    check_sensitivity(delta_f)?;
    let sigma = delta_f * (2.0 * (1.25 / budget.delta).ln()).sqrt() / budget.epsilon;
    Ok(ClassicSigma {
        sigma,
        guaranteed: budget.epsilon <= 1.0,
    })
}

fn check_sensitivity(delta_f: f64) -> Result<()> {
    if !(delta_f >= 0.0) || !delta_f.is_finite() {
        return Err(Error::Argument(format!(
            "sensitivity must be finite and nonnegative, got {delta_f}"
        )));
    }
    Ok(())
}

/// Standard normal CDF, `0.5 * erfc(-z / sqrt 2)`.
///
/// `erfc` is the fdlibm rational approximation shipped in `libm`, accurate to
/// about one ulp, far inside the 1e-12 absolute error budget.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// `ln Phi(z)`, finite for arbitrarily negative `z`.
pub fn log_normal_cdf(z: f64) -> f64 {
    let x = -z / std::f64::consts::SQRT_2;
    if x < 25.0 {
        return normal_cdf(z).ln();
    }
    // erfc(x) = exp(-x^2) / (x sqrt(pi)) * sum_n (-1)^n (2n-1)!! / (2x^2)^n
    let inv = 1.0 / (2.0 * x * x);
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..=8 {
        term *= -((2 * n - 1) as f64) * inv;
        sum += term;
    }
    -x * x - (x * std::f64::consts::PI.sqrt()).ln() + sum.ln() - std::f64::consts::LN_2
}

/// Tightest `delta` met by Gaussian noise of scale `sigma` on a query with
/// sensitivity `delta_f` at privacy level `epsilon`:
///
/// `Phi(D/(2s) - e s/D) - exp(e) Phi(-D/(2s) - e s/D)`.
///
/// The second term is evaluated in log space so that large `epsilon` does not
/// overflow.
pub fn gaussian_privacy_profile(sigma: f64, delta_f: f64, epsilon: f64) -> Result<f64> {
    for (name, v) in [("sigma", sigma), ("sensitivity", delta_f), ("epsilon", epsilon)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Argument(format!(
                "{name} must be positive and finite, got {v}"
            )));
        }
    }
    Ok(profile_at_ratio(sigma / delta_f, epsilon))
}

/// Profile as a function of `r = sigma / delta_f` only.
fn profile_at_ratio(r: f64, epsilon: f64) -> f64 {
    let half_inv = 0.5 / r;
    let shift = epsilon * r;
    let lead = normal_cdf(half_inv - shift);
    let tail = (epsilon + log_normal_cdf(-half_inv - shift)).exp();
    (lead - tail).clamp(0.0, 1.0)
}

const BISECTION_STEPS: usize = 200;
const SIGMA_REL_TOL: f64 = 1e-9;

/// Smallest `sigma` whose privacy profile is at most `delta`, by bracketing
/// and bisection on the monotone profile. Zero sensitivity gives zero noise.
pub fn analytic_gaussian_sigma(delta_f: f64, budget: &PrivacyBudget) -> Result<f64> {
    check_sensitivity(delta_f)?;
    if delta_f == 0.0 {
        return Ok(0.0);
    }
    let eps = budget.epsilon;
    let delta = budget.delta;
    let feasible = |r: f64| profile_at_ratio(r, eps) <= delta;

    // The profile depends on sigma / delta_f only, so search the ratio.
    let mut lo = 1e-6;
    let mut guard = 0;
    while feasible(lo) {
        lo *= 0.5;
        guard += 1;
        if guard > 1000 {
            return Err(Error::Numerical(
                "could not find an infeasible lower bracket for sigma".into(),
            ));
        }
    }
    let classic = (2.0 * (1.25 / delta).ln()).sqrt() / eps;
    let mut hi = f64::max(10.0, 2.0 * classic);
    guard = 0;
    while !feasible(hi) {
        hi *= 2.0;
        guard += 1;
        if guard > 1000 || !hi.is_finite() {
            return Err(Error::Numerical(
                "could not find a feasible upper bracket for sigma".into(),
            ));
        }
    }
    for _ in 0..BISECTION_STEPS {
        if hi - lo <= SIGMA_REL_TOL * hi {
            return Ok(delta_f * hi);
        }
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(Error::Numerical(format!(
        "sigma bisection did not converge in {BISECTION_STEPS} steps \
         (epsilon={eps}, delta={delta})"
    )))
}

/// Analytic calibration for one release, packaged for the calibration log.
pub fn calibrate(
    target: NoiseTarget,
    delta_f: f64,
    budget: &PrivacyBudget,
) -> Result<NoiseCalibration> {
    Ok(NoiseCalibration {
        target,
        sensitivity: delta_f,
        sigma: analytic_gaussian_sigma(delta_f, budget)?,
        method: CalibrationMethod::Analytic,
    })
}
