//! PLS1 regression with optional `(epsilon, delta)`-differentially private
//! release of weights, scores and loadings.
//!
//! Each component runs the NIPALS steps on the residuals `E`, `f`:
//!
//! 1. `w = E^T f / |E^T f|`
//! 2. `t = E w / |E w|`
//! 3. `p = E^T t / t^T t`, `c = f^T t / t^T t`
//! 4. `E -= t p^T`, `f -= t c`
//!
//! The released weight and score vectors are the noisy ones re-normalized to
//! unit length; released loadings are the noisy ones as is. Deflation always
//! uses the non-private `t`, `p` and `c`. Noise for every release is
//! calibrated from sample bounds on the current residuals.
//!
//! Without a privacy budget every noise vector is zero and the same code path
//! yields ordinary PLS1.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::solve_checked;
use crate::mechanism::{
    calibrate, sample_bounds, sensitivity, NoiseCalibration, NoiseTarget, PrivacyBudget,
};
use crate::rng::{gaussian_vector, RngStream};

/// Largest condition number accepted for the `P^T W` system.
pub const MAX_CONDITION: f64 = 1e12;

const SINGULAR_HINT: &str = "reduce the number of components or raise epsilon";

/// Which vector the weight and score noise is added to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoisePlacement {
    /// Noise is added to the raw statistics whose sensitivity was bounded:
    /// the covariance `E^T f` and the scores `E w` for unit `w`. The noisy
    /// vectors are then normalized.
    #[default]
    Raw,
    /// Noise is added to the already normalized `w` and `t`, then they are
    /// normalized again.
    Normalized,
}

/// Whether drawn noise is actually applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    #[default]
    Calibrated,
    /// Calibration still runs and is logged, but every noise draw is zero.
    Suppressed,
}

#[derive(Debug, Clone)]
pub struct FitConfig {
    pub k: usize,
    pub privacy: Option<PrivacyBudget>,
    pub rng: RngStream,
    /// Early stop once `|E^T f|` falls below this fraction of its value for
    /// the first component.
    pub residual_tolerance: f64,
    pub placement: NoisePlacement,
    pub noise: NoiseMode,
}

impl FitConfig {
    pub fn baseline(k: usize) -> Self {
        Self {
            k,
            privacy: None,
            rng: RngStream::new(0, 0),
            residual_tolerance: 1e-12,
            placement: NoisePlacement::default(),
            noise: NoiseMode::default(),
        }
    }

    pub fn private(k: usize, budget: PrivacyBudget, rng: RngStream) -> Self {
        Self {
            privacy: Some(budget),
            rng,
            ..Self::baseline(k)
        }
    }

    pub fn with_placement(mut self, placement: NoisePlacement) -> Self {
        self.placement = placement;
        self
    }

    pub fn with_noise(mut self, noise: NoiseMode) -> Self {
        self.noise = noise;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlsModel {
    /// Fitted component count (may be below `requested_k` after an early stop).
    pub k: usize,
    pub requested_k: usize,
    pub early_stopped: bool,
    pub weights: Array2<f64>,
    pub x_loadings: Array2<f64>,
    pub y_loadings: Array1<f64>,
    pub scores: Array2<f64>,
    pub coefficients: Array1<f64>,
    pub x_means: Array1<f64>,
    pub y_mean: f64,
    pub privacy: Option<PrivacyBudget>,
    pub placement: NoisePlacement,
    pub calibration_log: Vec<NoiseCalibration>,
    pub seed: u64,
    pub stream_id: u64,
}

pub fn fit(data: &Dataset, cfg: &FitConfig) -> Result<PlsModel> {
    let n = data.n_samples();
    let m = data.n_channels();
    if n < 2 {
        return Err(Error::Degenerate(format!(
            "fitting needs at least 2 samples, got {n}"
        )));
    }
    if cfg.k == 0 || cfg.k > (n - 1).min(m) {
        return Err(Error::Config(format!(
            "number of components must be in 1..={} for {n} samples and {m} channels, got {}",
            (n - 1).min(m),
            cfg.k
        )));
    }
    if !(cfg.residual_tolerance > 0.0) {
        return Err(Error::Argument("residual tolerance must be positive".into()));
    }

    let centered = data.mean_center()?;
    let x_means = centered
        .x_means()
        .cloned()
        .unwrap_or_else(|| Array1::zeros(m));
    let y_mean = centered.y_mean().unwrap_or(0.0);
    let (mut e, mut f) = centered.into_parts();

    let mut rng = cfg.rng.clone();
    let mut weights = Vec::with_capacity(cfg.k);
    let mut scores = Vec::with_capacity(cfg.k);
    let mut x_loadings = Vec::with_capacity(cfg.k);
    let mut y_loadings = Vec::with_capacity(cfg.k);
    let mut calibration_log = Vec::with_capacity(4 * cfg.k);
    let mut first_cov_norm = None;

    for _ in 0..cfg.k {
        let cov = e.t().dot(&f);
        let cov_norm = norm(cov.view());
        let reference = *first_cov_norm.get_or_insert(cov_norm);
        if cov_norm == 0.0 || cov_norm < cfg.residual_tolerance * reference {
            break;
        }
        let w = &cov / cov_norm;

        let raw_scores = e.dot(&w);
        let t = &raw_scores / norm(raw_scores.view());
        let tt = t.dot(&t);
        let p = e.t().dot(&t) / tt;
        let c = f.dot(&t) / tt;

        let mut noise = NoiseDraw::new(cfg, &mut rng, &e, &f, &mut calibration_log)?;
        let w_base = match cfg.placement {
            NoisePlacement::Raw => &cov,
            NoisePlacement::Normalized => &w,
        };
        let w_rel = normalized(&(w_base + &noise.vector(NoiseTarget::Weights, m)?), "weights")?;
        let t_base = match cfg.placement {
            NoisePlacement::Raw => &raw_scores,
            NoisePlacement::Normalized => &t,
        };
        let t_rel = normalized(&(t_base + &noise.vector(NoiseTarget::Scores, n)?), "scores")?;
        let p_rel = &p + &noise.vector(NoiseTarget::XLoadings, m)?;
        let c_rel = c + noise.vector(NoiseTarget::YLoading, 1)?[0];

        // deflate with the non-private component
        for (mut row, &ti) in e.rows_mut().into_iter().zip(t.iter()) {
            row.scaled_add(-ti, &p);
        }
        f.scaled_add(-c, &t);

        weights.push(w_rel);
        scores.push(t_rel);
        x_loadings.push(p_rel);
        y_loadings.push(c_rel);
    }

    let k = weights.len();
    let weights = stack_columns(&weights, m);
    let scores = stack_columns(&scores, n);
    let x_loadings = stack_columns(&x_loadings, m);
    let y_loadings = Array1::from(y_loadings);
    let coefficients = if k == 0 {
        Array1::zeros(m)
    } else {
        regression_coefficients(weights.view(), x_loadings.view(), y_loadings.view())?
    };

    Ok(PlsModel {
        k,
        requested_k: cfg.k,
        early_stopped: k < cfg.k,
        weights,
        x_loadings,
        y_loadings,
        scores,
        coefficients,
        x_means,
        y_mean,
        privacy: cfg.privacy,
        placement: cfg.placement,
        calibration_log,
        seed: cfg.rng.seed(),
        stream_id: cfg.rng.stream_id(),
    })
}

/// Free-function form of [`PlsModel::predict`].
pub fn predict(model: &PlsModel, x_new: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
    model.predict(x_new)
}

/// Per-component noise source: calibrates against the current residuals and
/// draws in the fixed order weights, scores, x-loadings, y-loading.
struct NoiseDraw<'a> {
    rng: &'a mut RngStream,
    bounds: Option<crate::mechanism::SampleBounds>,
    budget: Option<PrivacyBudget>,
    mode: NoiseMode,
    log: &'a mut Vec<NoiseCalibration>,
}

impl<'a> NoiseDraw<'a> {
    fn new(
        cfg: &FitConfig,
        rng: &'a mut RngStream,
        e: &Array2<f64>,
        f: &Array1<f64>,
        log: &'a mut Vec<NoiseCalibration>,
    ) -> Result<Self> {
        let bounds = match cfg.privacy {
            Some(_) => Some(sample_bounds(e.view(), f.view())?),
            None => None,
        };
        Ok(Self {
            rng,
            bounds,
            budget: cfg.privacy,
            mode: cfg.noise,
            log,
        })
    }

    fn vector(&mut self, target: NoiseTarget, len: usize) -> Result<Array1<f64>> {
        let (Some(bounds), Some(budget)) = (self.bounds.as_ref(), self.budget.as_ref()) else {
            return Ok(Array1::zeros(len));
        };
        let cal = calibrate(target, sensitivity(target, bounds), budget)?;
        self.log.push(cal);
        let sigma = match self.mode {
            NoiseMode::Calibrated => cal.sigma,
            NoiseMode::Suppressed => 0.0,
        };
        Ok(Array1::from(gaussian_vector(len, sigma, self.rng)?))
    }
}

fn norm(v: ArrayView1<'_, f64>) -> f64 {
    v.dot(&v).sqrt()
}

fn normalized(v: &Array1<f64>, what: &str) -> Result<Array1<f64>> {
    let n = norm(v.view());
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::Numerical(format!(
            "released {what} vector has norm {n} and cannot be normalized"
        )));
    }
    Ok(v / n)
}

fn stack_columns(cols: &[Array1<f64>], rows: usize) -> Array2<f64> {
    let mut out = Array2::zeros((rows, cols.len()));
    for (j, c) in cols.iter().enumerate() {
        out.column_mut(j).assign(c);
    }
    out
}

/// `b = W (P^T W)^{-1} c`, solving the k-by-k system instead of inverting.
pub fn regression_coefficients(
    weights: ArrayView2<'_, f64>,
    x_loadings: ArrayView2<'_, f64>,
    y_loadings: ArrayView1<'_, f64>,
) -> Result<Array1<f64>> {
    let k = weights.ncols();
    if x_loadings.dim() != weights.dim() || y_loadings.len() != k {
        return Err(Error::Shape(format!(
            "W is {:?}, P is {:?}, c has {} entries",
            weights.dim(),
            x_loadings.dim(),
            y_loadings.len()
        )));
    }
    let gram = x_loadings.t().dot(&weights);
    let z = solve_checked(gram.view(), y_loadings, MAX_CONDITION).map_err(|s| {
        Error::Singular {
            components: k,
            condition: s.condition,
            hint: SINGULAR_HINT,
        }
    })?;
    Ok(weights.dot(&z))
}

impl PlsModel {
    pub fn n_channels(&self) -> usize {
        self.coefficients.len()
    }

    /// `y_hat = (X_new - x_means) b + y_mean`, row by row.
    pub fn predict(&self, x_new: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        if x_new.ncols() != self.n_channels() {
            return Err(Error::Shape(format!(
                "model expects {} channels, got {}",
                self.n_channels(),
                x_new.ncols()
            )));
        }
        let centered = &x_new - &self.x_means.view().insert_axis(Axis(0));
        Ok(centered.dot(&self.coefficients) + self.y_mean)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}
