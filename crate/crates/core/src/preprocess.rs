//! Spectral pre-treatments: Savitzky-Golay filtering, multiplicative scatter
//! correction, airPLS baseline removal and column centering, plus a pipeline
//! that fits its state on training rows and replays it on new rows.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::column_means;
use crate::error::{Error, Result};
use crate::linalg::{Lu, SymBand};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SgConfig {
    pub window: usize,
    pub polyorder: usize,
    pub derivative: usize,
}

impl Default for SgConfig {
    fn default() -> Self {
        Self {
            window: 5,
            polyorder: 2,
            derivative: 1,
        }
    }
}

impl SgConfig {
    pub fn new(window: usize, polyorder: usize, derivative: usize) -> Result<Self> {
        let cfg = Self {
            window,
            polyorder,
            derivative,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(Error::Argument(format!(
                "Savitzky-Golay window must be odd and >= 3, got {}",
                self.window
            )));
        }
        if self.polyorder >= self.window {
            return Err(Error::Argument(format!(
                "polynomial order {} must be below the window {}",
                self.polyorder, self.window
            )));
        }
        if self.derivative > self.polyorder {
            return Err(Error::Argument(format!(
                "derivative {} exceeds polynomial order {}",
                self.derivative, self.polyorder
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AirPlsConfig {
    pub lambda: f64,
    pub max_iterations: usize,
    pub diff_order: usize,
}

impl Default for AirPlsConfig {
    fn default() -> Self {
        Self {
            lambda: 100.0,
            max_iterations: 15,
            diff_order: 1,
        }
    }
}

impl AirPlsConfig {
    pub fn new(lambda: f64, max_iterations: usize, diff_order: usize) -> Result<Self> {
        let cfg = Self {
            lambda,
            max_iterations,
            diff_order,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::Argument(format!(
                "airPLS lambda must be positive, got {}",
                self.lambda
            )));
        }
        if self.max_iterations == 0 || self.diff_order == 0 {
            return Err(Error::Argument(
                "airPLS iterations and difference order must be positive".into(),
            ));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Savitzky-Golay

/// Least-squares polynomial filter weights for one output point.
///
/// Fits a polynomial of degree `polyorder` to `window` equally spaced samples
/// and returns the weights producing its `derivative`-th derivative at sample
/// `pos` (0-based within the window), unit sample spacing.
pub fn savgol_coefficients(cfg: &SgConfig, pos: usize) -> Result<Vec<f64>> {
    cfg.validate()?;
    assert!(pos < cfg.window);
    let half = (cfg.window / 2) as f64;
    let q = cfg.polyorder + 1;
    // abscissae scaled to [-1, 1]-ish for conditioning
    let xs: Vec<f64> = (0..cfg.window)
        .map(|j| (j as f64 - pos as f64) / half)
        .collect();
    let vander = Array2::from_shape_fn((cfg.window, q), |(j, i)| xs[j].powi(i as i32));
    let normal = vander.t().dot(&vander);
    let mut rhs = Array1::zeros(q);
    rhs[cfg.derivative] = factorial(cfg.derivative) / half.powi(cfg.derivative as i32);
    let lu = Lu::new(normal.view());
    if lu.is_exactly_singular() {
        return Err(Error::Numerical("singular Savitzky-Golay normal matrix".into()));
    }
    Ok(vander.dot(&lu.solve(rhs.view())).to_vec())
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|v| v as f64).product()
}

/// Filter every row. Edge points use one-sided fits over the first or last
/// full window, so the output keeps all channels.
pub fn savitzky_golay(x: &Array2<f64>, cfg: &SgConfig) -> Result<Array2<f64>> {
    cfg.validate()?;
    let m = x.ncols();
    let w = cfg.window;
    if m < w {
        return Err(Error::Shape(format!(
            "Savitzky-Golay window {w} exceeds the {m} available channels"
        )));
    }
    let half = w / 2;
    let kernels: Vec<Vec<f64>> = (0..w)
        .map(|pos| savgol_coefficients(cfg, pos))
        .collect::<Result<_>>()?;
    let mut out = Array2::zeros(x.raw_dim());
    for (row, mut dst) in x.rows().into_iter().zip(out.rows_mut()) {
        for i in 0..m {
            let (start, pos) = if i < half {
                (0, i)
            } else if i + half >= m {
                (m - w, i - (m - w))
            } else {
                (i - half, half)
            };
            dst[i] = kernels[pos]
                .iter()
                .enumerate()
                .map(|(j, k)| k * row[start + j])
                .sum();
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// MSC

/// Multiplicative scatter correction against `reference` (the column mean of
/// `x` when absent): each row is regressed as `a + b * reference` and mapped
/// to `(row - a) / b`.
pub fn msc(x: &Array2<f64>, reference: Option<ArrayView1<'_, f64>>) -> Result<Array2<f64>> {
    let reference = match reference {
        Some(r) => r.to_owned(),
        None => column_means(x),
    };
    msc_with_reference(x, &reference)
}

fn msc_with_reference(x: &Array2<f64>, reference: &Array1<f64>) -> Result<Array2<f64>> {
    if reference.len() != x.ncols() {
        return Err(Error::Shape(format!(
            "MSC reference has {} channels, spectra have {}",
            reference.len(),
            x.ncols()
        )));
    }
    let m = reference.len() as f64;
    let ref_mean = reference.sum() / m;
    let centered_ref = reference.mapv(|v| v - ref_mean);
    let ref_ss = centered_ref.dot(&centered_ref);
    if !(ref_ss > 0.0) {
        return Err(Error::Degenerate("MSC reference spectrum is constant".into()));
    }
    let mut out = x.clone();
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        let row_mean = row.sum() / m;
        let slope = centered_ref.dot(&row) / ref_ss;
        if slope.abs() < 1e-12 {
            return Err(Error::Degenerate(format!(
                "MSC slope of row {i} is {slope:e}; the row is not explained by the reference"
            )));
        }
        let intercept = row_mean - slope * ref_mean;
        row.mapv_inplace(|v| (v - intercept) / slope);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// airPLS

/// Weighted Whittaker smoother: minimizes
/// `sum w_i (x_i - z_i)^2 + lambda |D_d z|^2` with `D_d` the d-th order
/// difference operator.
pub fn whittaker_smooth(
    x: ArrayView1<'_, f64>,
    weights: &[f64],
    lambda: f64,
    diff_order: usize,
) -> Result<Array1<f64>> {
    let m = x.len();
    assert_eq!(weights.len(), m);
    if m <= diff_order {
        return Err(Error::Shape(format!(
            "{m} channels are too few for a difference order of {diff_order}"
        )));
    }
    let stencil = difference_stencil(diff_order);
    let mut system = SymBand::new(m, diff_order);
    for (i, &w) in weights.iter().enumerate() {
        system.add(i, i, w);
    }
    // D has m - d rows; row r touches columns r..=r+d
    for r in 0..m - diff_order {
        for a in 0..=diff_order {
            for b in 0..=a {
                let v = lambda * stencil[a] * stencil[b];
                if a == b {
                    system.add(r + a, r + a, v);
                } else {
                    system.add(r + a, r + b, v);
                }
            }
        }
    }
    let rhs: Vec<f64> = weights.iter().zip(x.iter()).map(|(w, v)| w * v).collect();
    system
        .cholesky_solve(&rhs)
        .map(Array1::from)
        .ok_or_else(|| Error::Numerical("Whittaker system is not positive definite".into()))
}

/// Coefficients of the forward difference of order `d`, e.g. `[-1, 1]`,
/// `[1, -2, 1]`.
fn difference_stencil(d: usize) -> Vec<f64> {
    let mut s = vec![1.0];
    for _ in 0..d {
        let mut next = vec![0.0; s.len() + 1];
        for (i, v) in s.iter().enumerate() {
            next[i] -= v;
            next[i + 1] += v;
        }
        s = next;
    }
    s
}

/// airPLS baseline for one spectrum.
pub fn airpls_baseline(x: ArrayView1<'_, f64>, cfg: &AirPlsConfig) -> Result<Array1<f64>> {
    cfg.validate()?;
    let m = x.len();
    if m < 3 {
        return Err(Error::Shape(format!("airPLS needs at least 3 channels, got {m}")));
    }
    let abs_sum: f64 = x.iter().map(|v| v.abs()).sum();
    let mut weights = vec![1.0; m];
    let mut z = whittaker_smooth(x, &weights, cfg.lambda, cfg.diff_order)?;
    for iter in 1..=cfg.max_iterations {
        if iter > 1 {
            z = whittaker_smooth(x, &weights, cfg.lambda, cfg.diff_order)?;
        }
        let d = &x - &z;
        let neg_sum: f64 = d.iter().filter(|&&v| v < 0.0).map(|v| -v).sum();
        if neg_sum == 0.0 || neg_sum < 1e-3 * abs_sum || iter == cfg.max_iterations {
            break;
        }
        let scale = iter as f64 / neg_sum;
        let mut closest_neg = f64::NEG_INFINITY;
        for (w, &di) in weights.iter_mut().zip(d.iter()) {
            if di >= 0.0 {
                *w = 0.0;
            } else {
                *w = (scale * -di).exp();
                closest_neg = closest_neg.max(di);
            }
        }
        // keep the end points anchored
        let end = (scale * closest_neg).exp();
        weights[0] = end;
        weights[m - 1] = end;
    }
    Ok(z)
}

/// Subtract the airPLS baseline from every row.
pub fn airpls_correct(x: &Array2<f64>, cfg: &AirPlsConfig) -> Result<Array2<f64>> {
    cfg.validate()?;
    let rows: Vec<Array1<f64>> = (0..x.nrows())
        .into_par_iter()
        .map(|i| {
            let row = x.row(i);
            airpls_baseline(row, cfg).map(|z| &row - &z)
        })
        .collect::<Result<_>>()?;
    let mut out = Array2::zeros(x.raw_dim());
    for (mut dst, r) in out.rows_mut().into_iter().zip(rows) {
        dst.assign(&r);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Pipeline

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum Step {
    Sg(SgConfig),
    Msc,
    Airpls(AirPlsConfig),
    Center,
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Sg(c) => write!(f, "sg:{},{},{}", c.window, c.polyorder, c.derivative),
            Step::Msc => f.write_str("msc"),
            Step::Airpls(c) => write!(f, "airpls:{},{},{}", c.lambda, c.max_iterations, c.diff_order),
            Step::Center => f.write_str("center"),
        }
    }
}

impl FromStr for Step {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a)),
            None => (s, None),
        };
        let parts: Vec<&str> = args
            .map(|a| a.split(',').map(str::trim).collect())
            .unwrap_or_default();
        let bad = |what: &str| Error::Config(format!("invalid {what} step `{s}`"));
        match name.to_ascii_lowercase().as_str() {
            "sg" => {
                let cfg = match parts.as_slice() {
                    [] => SgConfig::default(),
                    [w, p, d] => SgConfig::new(
                        w.parse().map_err(|_| bad("sg"))?,
                        p.parse().map_err(|_| bad("sg"))?,
                        d.parse().map_err(|_| bad("sg"))?,
                    )?,
                    _ => return Err(bad("sg")),
                };
                Ok(Step::Sg(cfg))
            }
            "msc" if parts.is_empty() => Ok(Step::Msc),
            "center" if parts.is_empty() => Ok(Step::Center),
            "airpls" => {
                let cfg = match parts.as_slice() {
                    [] => AirPlsConfig::default(),
                    [l, i, o] => AirPlsConfig::new(
                        l.parse().map_err(|_| bad("airpls"))?,
                        i.parse().map_err(|_| bad("airpls"))?,
                        o.parse().map_err(|_| bad("airpls"))?,
                    )?,
                    _ => return Err(bad("airpls")),
                };
                Ok(Step::Airpls(cfg))
            }
            _ => Err(Error::Config(format!(
                "unknown preprocessing step `{s}` (expected sg, msc, airpls or center)"
            ))),
        }
    }
}

/// State a step learned from training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StepState {
    Stateless,
    MscReference(Array1<f64>),
    ColumnMeans(Array1<f64>),
}

/// Ordered preprocessing steps. `fit` learns per-step state from training
/// rows only; `transform` replays that state.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    steps: Vec<Step>,
    state: Option<Vec<StepState>>,
}

impl Pipeline {
    pub fn new(steps: Vec<Step>) -> Self {
        Self { steps, state: None }
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn is_fitted(&self) -> bool {
        self.state.is_some()
    }

    pub fn state(&self) -> Option<&[StepState]> {
        self.state.as_deref()
    }

    /// Short label such as `sg:5,2,1|msc`, or `raw` for no steps.
    pub fn tag(&self) -> String {
        if self.steps.is_empty() {
            "raw".to_string()
        } else {
            self.to_string()
        }
    }

    /// Learn state from `train` and return the transformed training rows.
    pub fn fit_transform(&mut self, train: &Array2<f64>) -> Result<Array2<f64>> {
        let mut cur = train.clone();
        let mut states = Vec::with_capacity(self.steps.len());
        for step in &self.steps {
            let state = match step {
                Step::Msc => StepState::MscReference(column_means(&cur)),
                Step::Center => StepState::ColumnMeans(column_means(&cur)),
                Step::Sg(_) | Step::Airpls(_) => StepState::Stateless,
            };
            cur = apply_step(step, &state, &cur)?;
            states.push(state);
        }
        self.state = Some(states);
        Ok(cur)
    }

    pub fn transform(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let states = self.state.as_ref().ok_or_else(|| {
            Error::State("preprocessing pipeline must be fitted on training data first".into())
        })?;
        let mut cur = x.clone();
        for (step, state) in self.steps.iter().zip(states) {
            cur = apply_step(step, state, &cur)?;
        }
        Ok(cur)
    }
}

fn apply_step(step: &Step, state: &StepState, x: &Array2<f64>) -> Result<Array2<f64>> {
    match (step, state) {
        (Step::Sg(cfg), _) => savitzky_golay(x, cfg),
        (Step::Airpls(cfg), _) => airpls_correct(x, cfg),
        (Step::Msc, StepState::MscReference(r)) => msc_with_reference(x, r),
        (Step::Center, StepState::ColumnMeans(mu)) => {
            if mu.len() != x.ncols() {
                return Err(Error::Shape(format!(
                    "centering was fitted on {} channels, got {}",
                    mu.len(),
                    x.ncols()
                )));
            }
            Ok(x - &mu.view().insert_axis(Axis(0)))
        }
        _ => Err(Error::State(format!("step `{step}` has mismatched state"))),
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.steps.iter().enumerate() {
            if i > 0 {
                f.write_str("|")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl FromStr for Pipeline {
    type Err = Error;

    /// Parses `sg:5,2,1|msc|airpls:100,15,1|center`. Empty, `none` and `raw`
    /// give the empty pipeline.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s.eq_ignore_ascii_case("none") || s.eq_ignore_ascii_case("raw") {
            return Ok(Pipeline::default());
        }
        let steps = s.split('|').map(Step::from_str).collect::<Result<_>>()?;
        Ok(Pipeline::new(steps))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use ndarray::array;
    use proptest::prelude::*;

    fn gaussian(m: usize, mu: f64, sigma: f64, h: f64) -> Array1<f64> {
        Array1::from_shape_fn(m, |i| h * (-((i as f64 - mu).powi(2)) / (2.0 * sigma * sigma)).exp())
    }

    #[test]
    fn sg_kernel_matches_least_squares_slope() {
        // slope of the LS line through (-2..=2, y) is sum(x y) / sum(x^2) = sum(x y) / 10
        let k = savgol_coefficients(&SgConfig::default(), 2).unwrap();
        let expected = [-0.2, -0.1, 0.0, 0.1, 0.2];
        for (a, b) in k.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14, "{k:?}");
        }
    }

    #[test]
    fn sg_smoothing_kernel_is_classic() {
        // (5, 2, 0): [-3, 12, 17, 12, -3] / 35
        let k = savgol_coefficients(&SgConfig::new(5, 2, 0).unwrap(), 2).unwrap();
        let expected = [-3.0, 12.0, 17.0, 12.0, -3.0].map(|v| v / 35.0);
        for (a, b) in k.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn sg_constant_row_has_zero_derivative() {
        let x = Array2::from_elem((2, 12), 4.2);
        let d = savitzky_golay(&x, &SgConfig::default()).unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn sg_reproduces_quadratic_derivative() {
        let (a, b, c) = (1.5, -0.7, 0.03);
        let row = Array1::from_shape_fn(30, |i| {
            let x = i as f64;
            a + b * x + c * x * x
        });
        let x = row.insert_axis(Axis(0));
        let d = savitzky_golay(&x, &SgConfig::default()).unwrap();
        // order-2 fits reproduce a quadratic everywhere, edges included
        for i in 0..30 {
            let expected = b + 2.0 * c * i as f64;
            assert!((d[[0, i]] - expected).abs() < 1e-10, "i={i}");
        }
    }

    #[test]
    fn sg_config_and_shape_errors() {
        assert!(SgConfig::new(4, 2, 1).is_err());
        assert!(SgConfig::new(5, 5, 1).is_err());
        assert!(SgConfig::new(5, 2, 3).is_err());
        let x = Array2::zeros((1, 4));
        assert!(matches!(
            savitzky_golay(&x, &SgConfig::default()),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn msc_reference_row_unchanged() {
        let reference = gaussian(40, 20.0, 5.0, 3.0) + 0.5;
        let x = ndarray::stack(Axis(0), &[reference.view(), (&reference * 2.0 + 5.0).view()]).unwrap();
        let out = msc(&x, Some(reference.view())).unwrap();
        for j in 0..40 {
            assert!((out[[0, j]] - reference[j]).abs() < 1e-12);
            assert!((out[[1, j]] - reference[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn msc_outputs_have_unit_slope_zero_intercept() {
        let mut rng = RngStream::new(2, 2);
        let base = gaussian(60, 25.0, 8.0, 2.0) + gaussian(60, 45.0, 4.0, 1.0);
        let x = Array2::from_shape_fn((8, 60), |(_, j)| base[j]);
        let mut x = x;
        for mut row in x.rows_mut() {
            let a = rng.uniform_range(-1.0, 1.0);
            let b = rng.uniform_range(0.5, 1.5);
            let wiggle = rng.uniform_range(-0.05, 0.05);
            for (j, v) in row.iter_mut().enumerate() {
                *v = a + b * *v + wiggle * (j as f64 / 10.0).sin();
            }
        }
        let reference = column_means(&x);
        let out = msc(&x, None).unwrap();
        // OLS oracle on the corrected rows
        let rm = reference.mean().unwrap();
        for row in out.rows() {
            let xm = row.mean().unwrap();
            let mut sxy = 0.0;
            let mut sxx = 0.0;
            for j in 0..60 {
                sxy += (reference[j] - rm) * (row[j] - xm);
                sxx += (reference[j] - rm).powi(2);
            }
            let slope = sxy / sxx;
            let intercept = xm - slope * rm;
            assert!((slope - 1.0).abs() < 1e-10);
            assert!(intercept.abs() < 1e-10);
        }
    }

    #[test]
    fn msc_degenerate_cases() {
        let x = array![[1.0, 2.0, 3.0], [5.0, 5.0, 5.0]];
        let r = array![1.0, 2.0, 3.0];
        match msc(&x, Some(r.view())) {
            Err(Error::Degenerate(msg)) => assert!(msg.contains("row 1")),
            other => panic!("{other:?}"),
        }
        let flat = array![2.0, 2.0, 2.0];
        assert!(msc(&x, Some(flat.view())).is_err());
    }

    #[test]
    fn msc_idempotent_with_fixed_reference() {
        let mut rng = RngStream::new(4, 4);
        let reference = gaussian(30, 10.0, 4.0, 2.0) + 1.0;
        let x = Array2::from_shape_fn((5, 30), |(_, j)| reference[j] * rng.uniform_range(0.8, 1.2) + rng.uniform_range(-0.1, 0.1));
        let once = msc(&x, Some(reference.view())).unwrap();
        let twice = msc(&once, Some(reference.view())).unwrap();
        for (a, b) in once.iter().zip(twice.iter()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn difference_stencils() {
        assert_eq!(difference_stencil(1), vec![-1.0, 1.0]);
        assert_eq!(difference_stencil(2), vec![1.0, -2.0, 1.0]);
        assert_eq!(difference_stencil(3), vec![-1.0, 3.0, -3.0, 1.0]);
    }

    #[test]
    fn whittaker_matches_dense_solution() {
        let m = 15;
        let x = Array1::from_shape_fn(m, |i| (i as f64 * 0.7).sin() + 0.1 * i as f64);
        let w: Vec<f64> = (0..m).map(|i| 0.5 + (i % 3) as f64).collect();
        let lambda = 7.0;
        let z = whittaker_smooth(x.view(), &w, lambda, 2).unwrap();
        let d = Array2::from_shape_fn((m - 2, m), |(r, c)| match c as isize - r as isize {
            0 => 1.0,
            1 => -2.0,
            2 => 1.0,
            _ => 0.0,
        });
        let a = Array2::from_diag(&Array1::from(w.clone())) + d.t().dot(&d) * lambda;
        let rhs = Array1::from_shape_fn(m, |i| w[i] * x[i]);
        let dense = crate::linalg::solve_checked(a.view(), rhs.view(), 1e14).unwrap();
        for (u, v) in z.iter().zip(dense.iter()) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn airpls_flat_row_is_zeroed() {
        let x = Array2::from_elem((1, 50), 3.7);
        let out = airpls_correct(&x, &AirPlsConfig::default()).unwrap();
        assert!(out.iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn airpls_keeps_peak_on_zero_baseline() {
        let peak = gaussian(200, 100.0, 6.0, 10.0);
        let x = peak.clone().insert_axis(Axis(0));
        let out = airpls_correct(&x, &AirPlsConfig::default()).unwrap();
        let height = out[[0, 100]];
        assert!((height - 10.0).abs() < 0.5, "height {height}");
    }

    #[test]
    fn airpls_ramp_matches_reference_run() {
        // values from an independent sparse-solver run of the reference algorithm
        let m = 200;
        let peak = gaussian(m, 100.0, 6.0, 10.0);
        let ramp = Array1::from_shape_fn(m, |i| 2.0 + 0.02 * i as f64);
        let x = &peak + &ramp;
        let z = airpls_baseline(x.view(), &AirPlsConfig::default()).unwrap();
        let err = &z - &ramp;
        assert!((err[100] + 0.612939437254735).abs() < 1e-9, "{}", err[100]);
        assert!((err[199] + 1.3121748647712046).abs() < 1e-9, "{}", err[199]);
        let corrected = airpls_correct(&x.insert_axis(Axis(0)), &AirPlsConfig::default()).unwrap();
        assert!((corrected[[0, 100]] - 10.0).abs() < 1.0);
    }

    #[test]
    fn airpls_baseline_stays_below_peaks() {
        let m = 150;
        let signal = gaussian(m, 40.0, 4.0, 5.0) + gaussian(m, 100.0, 8.0, 3.0);
        let z = airpls_baseline(signal.view(), &AirPlsConfig::default()).unwrap();
        for (zi, si) in z.iter().zip(signal.iter()) {
            assert!(*zi <= si + 1e-3, "baseline {zi} above signal {si}");
        }
    }

    #[test]
    fn airpls_short_rows_rejected() {
        let x = Array2::zeros((1, 2));
        assert!(airpls_correct(&x, &AirPlsConfig::default()).is_err());
        assert!(AirPlsConfig::new(0.0, 15, 1).is_err());
        assert!(AirPlsConfig::new(100.0, 0, 1).is_err());
    }

    #[test]
    fn pipeline_parse_and_display() {
        let p: Pipeline = "sg:5,2,1|center".parse().unwrap();
        assert_eq!(p.steps(), &[Step::Sg(SgConfig::default()), Step::Center]);
        assert_eq!(p.to_string(), "sg:5,2,1|center");
        let p: Pipeline = "msc|airpls".parse().unwrap();
        assert_eq!(p.to_string(), "msc|airpls:100,15,1");
        assert!("".parse::<Pipeline>().unwrap().steps().is_empty());
        assert_eq!("none".parse::<Pipeline>().unwrap().tag(), "raw");
        assert!("foo".parse::<Pipeline>().is_err());
        assert!("sg:4,2,1".parse::<Pipeline>().is_err());
        assert!("sg:5,2".parse::<Pipeline>().is_err());
    }

    #[test]
    fn empty_pipeline_is_identity() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        let mut p = Pipeline::default();
        assert_eq!(p.fit_transform(&x).unwrap(), x);
        assert_eq!(p.transform(&x).unwrap(), x);
    }

    #[test]
    fn unfitted_pipeline_refuses_transform() {
        let p: Pipeline = "msc".parse().unwrap();
        assert!(matches!(p.transform(&array![[1.0, 2.0, 3.0]]), Err(Error::State(_))));
    }

    #[test]
    fn msc_pipeline_replays_on_train() {
        let mut rng = RngStream::new(6, 6);
        let base = gaussian(30, 12.0, 4.0, 2.0);
        let x = Array2::from_shape_fn((6, 30), |(_, j)| base[j] * rng.uniform_range(0.5, 1.5) + rng.uniform_range(0.0, 0.3));
        let mut p: Pipeline = "msc".parse().unwrap();
        let fitted = p.fit_transform(&x).unwrap();
        assert_eq!(fitted, msc(&x, None).unwrap());
        assert_eq!(p.transform(&x).unwrap(), fitted);
    }

    #[test]
    fn sg_center_pipeline_uses_train_means() {
        let mut rng = RngStream::new(7, 7);
        let train = Array2::from_shape_fn((10, 20), |_| rng.standard_normal());
        let test = Array2::from_shape_fn((4, 20), |_| rng.standard_normal());
        let mut p: Pipeline = "sg:5,2,1|center".parse().unwrap();
        p.fit_transform(&train).unwrap();
        let got = p.transform(&test).unwrap();
        let sg_cfg = SgConfig::default();
        let train_sg = savitzky_golay(&train, &sg_cfg).unwrap();
        let means = column_means(&train_sg);
        let manual = savitzky_golay(&test, &sg_cfg).unwrap() - &means.insert_axis(Axis(0));
        for (a, b) in got.iter().zip(manual.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn fitted_state_ignores_test_rows() {
        let mut rng = RngStream::new(8, 8);
        let train = Array2::from_shape_fn((10, 20), |_| rng.uniform_range(1.0, 2.0));
        let mut p1: Pipeline = "msc|center".parse().unwrap();
        p1.fit_transform(&train).unwrap();
        // refit on a row permutation of the same training rows
        let perm = rng.permutation(10);
        let shuffled = train.select(Axis(0), &perm);
        let mut p2: Pipeline = "msc|center".parse().unwrap();
        p2.fit_transform(&shuffled).unwrap();
        let s1 = p1.state().unwrap();
        let s2 = p2.state().unwrap();
        for (a, b) in s1.iter().zip(s2) {
            match (a, b) {
                (StepState::MscReference(u), StepState::MscReference(v))
                | (StepState::ColumnMeans(u), StepState::ColumnMeans(v)) => {
                    for (x, y) in u.iter().zip(v.iter()) {
                        assert!((x - y).abs() < 1e-12);
                    }
                }
                _ => panic!("state kinds differ"),
            }
        }
    }

    proptest! {
        #[test]
        fn sg_is_linear(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let mut rng = RngStream::new(seed, 1);
            let x = Array2::from_shape_fn((2, 16), |_| rng.standard_normal());
            let y = Array2::from_shape_fn((2, 16), |_| rng.standard_normal());
            let cfg = SgConfig::default();
            let lhs = savitzky_golay(&(&x * a + &y * b), &cfg).unwrap();
            let rhs = savitzky_golay(&x, &cfg).unwrap() * a + savitzky_golay(&y, &cfg).unwrap() * b;
            for (u, v) in lhs.iter().zip(rhs.iter()) {
                prop_assert!((u - v).abs() < 1e-10);
            }
        }
    }
}
