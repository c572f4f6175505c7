//! Error metrics, data splitting, cross-validation and privacy-utility sweeps.

use std::io::Write;

use ndarray::ArrayView1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::mechanism::PrivacyBudget;
use crate::pls::{fit, FitConfig, NoisePlacement};
use crate::preprocess::Pipeline;
use crate::rng::RngStream;

/// Failure probability used by every experiment driver unless overridden.
pub const DEFAULT_DELTA: f64 = 0.01;

pub fn rmse(y: ArrayView1<'_, f64>, yhat: ArrayView1<'_, f64>) -> Result<f64> {
    check_pair(y, yhat)?;
    let sse: f64 = y.iter().zip(yhat.iter()).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((sse / y.len() as f64).sqrt())
}

pub fn r2_score(y: ArrayView1<'_, f64>, yhat: ArrayView1<'_, f64>) -> Result<f64> {
    check_pair(y, yhat)?;
    let mean = y.sum() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Degenerate(
            "R^2 is undefined for a constant response".into(),
        ));
    }
    let ss_res: f64 = y.iter().zip(yhat.iter()).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

fn check_pair(y: ArrayView1<'_, f64>, yhat: ArrayView1<'_, f64>) -> Result<()> {
    if y.len() != yhat.len() {
        return Err(Error::Shape(format!(
            "{} targets but {} predictions",
            y.len(),
            yhat.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::Degenerate("no samples to score".into()));
    }
    Ok(())
}

/// Random row partition with `ceil(n (1 - f))` training rows.
pub fn train_test_split(
    d: &Dataset,
    test_fraction: f64,
    rng: &mut RngStream,
) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Argument(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let n = d.n_samples();
    // floor(n f) with a little slack so 80 * 0.3 lands on 24
    let n_test = (n as f64 * test_fraction + 1e-9).floor() as usize;
    let n_train = n - n_test;
    if n_test < 2 || n_train < 2 {
        return Err(Error::Degenerate(format!(
            "split of {n} samples gives {n_train} train / {n_test} test; both need at least 2"
        )));
    }
    let perm = rng.permutation(n);
    Ok((d.select_rows(&perm[..n_train]), d.select_rows(&perm[n_train..])))
}

/// Contiguous blocks of a permutation, sizes differing by at most one.
pub fn fold_assignments(n: usize, folds: usize, rng: &mut RngStream) -> Vec<Vec<usize>> {
    let perm = rng.permutation(n);
    let base = n / folds;
    let extra = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        out.push(perm[start..start + len].to_vec());
        start += len;
    }
    out
}

type Metric = fn(&ReportEntry) -> Option<f64>;

/// One model configuration in a search grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub k: usize,
    pub privacy: Option<PrivacyBudget>,
    #[serde(default)]
    pub placement: NoisePlacement,
}

impl GridPoint {
    pub fn baseline(k: usize) -> Self {
        Self {
            k,
            privacy: None,
            placement: NoisePlacement::default(),
        }
    }

    pub fn private(k: usize, budget: PrivacyBudget) -> Self {
        Self {
            k,
            privacy: Some(budget),
            placement: NoisePlacement::default(),
        }
    }

    pub fn fit_config(&self, rng: RngStream) -> FitConfig {
        FitConfig {
            k: self.k,
            privacy: self.privacy,
            rng,
            placement: self.placement,
            ..FitConfig::baseline(self.k)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub k: usize,
    pub preprocessing: String,
    pub rmsecv: Option<f64>,
    pub rmsep: Option<f64>,
    pub r2p: Option<f64>,
    pub seed: u64,
    pub repeat: usize,
    pub failed: Option<String>,
}

/// Mean, standard error and median of one metric over repeats of a setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub epsilon: Option<f64>,
    pub k: usize,
    pub preprocessing: String,
    pub metric: String,
    pub count: usize,
    pub mean: f64,
    pub std_error: f64,
    pub median: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub entries: Vec<ReportEntry>,
    pub aggregation: Vec<Aggregate>,
    /// Index into `entries` of the lowest RMSECV (cross-validation only).
    pub best: Option<usize>,
}

impl EvalReport {
    /// Recompute `aggregation` from `entries`, grouping by (epsilon, k,
    /// preprocessing) in order of first appearance.
    pub fn aggregate(&mut self) {
        type Key = (Option<u64>, usize, String);
        let mut keys: Vec<Key> = Vec::new();
        for e in &self.entries {
            let key = (e.epsilon.map(f64::to_bits), e.k, e.preprocessing.clone());
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        let mut out = Vec::new();
        for key in keys {
            let group: Vec<&ReportEntry> = self
                .entries
                .iter()
                .filter(|e| {
                    e.epsilon.map(f64::to_bits) == key.0 && e.k == key.1 && e.preprocessing == key.2
                })
                .collect();
            let metrics: [(&str, Metric); 3] = [
                ("rmsecv", |e| e.rmsecv),
                ("rmsep", |e| e.rmsep),
                ("r2p", |e| e.r2p),
            ];
            for (name, get) in metrics {
                let values: Vec<f64> = group.iter().filter_map(|e| get(e)).collect();
                if let Some(s) = Summary::of(&values) {
                    out.push(Aggregate {
                        epsilon: group[0].epsilon,
                        k: key.1,
                        preprocessing: key.2.clone(),
                        metric: name.to_string(),
                        count: values.len(),
                        mean: s.mean,
                        std_error: s.std_error,
                        median: s.median,
                    });
                }
            }
        }
        self.aggregation = out;
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Tidy CSV, one line per entry.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "epsilon,delta,k,preprocessing,rmsecv,rmsep,r2p,seed,repeat,failed"
        )?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for e in &self.entries {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                opt(e.epsilon),
                opt(e.delta),
                e.k,
                csv_field(&e.preprocessing),
                opt(e.rmsecv),
                opt(e.rmsep),
                opt(e.r2p),
                e.seed,
                e.repeat,
                csv_field(e.failed.as_deref().unwrap_or("")),
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std_error: f64,
    pub median: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std_error = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Some(Summary {
            mean,
            std_error,
            median: median(values),
        })
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Fit preprocessing and model on `train`, score on `test`.
pub fn fit_and_score(
    train: &Dataset,
    test: &Dataset,
    point: &GridPoint,
    pipeline: &Pipeline,
    rng: RngStream,
) -> Result<(f64, Option<f64>)> {
    let mut pipe = Pipeline::new(pipeline.steps().to_vec());
    let x_train = pipe.fit_transform(train.x())?;
    let x_test = pipe.transform(test.x())?;
    let model = fit(&train.with_x(x_train)?, &point.fit_config(rng))?;
    let yhat = model.predict(x_test.view())?;
    let e = rmse(test.y().view(), yhat.view())?;
    let r2 = r2_score(test.y().view(), yhat.view()).ok();
    Ok((e, r2))
}

/// k-fold cross-validation over a grid of model configurations.
///
/// One seeded permutation defines the folds for every grid point. Within each
/// fold, preprocessing state and centering come from that fold's training
/// rows only. A grid point whose fit fails in any fold is reported as failed
/// and the sweep continues. The best entry is the lowest RMSECV, ties going
/// to the smaller k.
pub fn kfold_cv(
    d: &Dataset,
    folds: usize,
    grid: &[GridPoint],
    pipeline: &Pipeline,
    rng: &RngStream,
) -> Result<EvalReport> {
    let n = d.n_samples();
    if folds < 2 || folds > n {
        return Err(Error::Argument(format!(
            "fold count must be in 2..={n}, got {folds}"
        )));
    }
    if grid.is_empty() {
        return Err(Error::Argument("the search grid is empty".into()));
    }
    let blocks = fold_assignments(n, folds, &mut rng.derive(0));
    let tag = pipeline.tag();

    let entries: Vec<ReportEntry> = grid
        .par_iter()
        .enumerate()
        .map(|(gi, point)| {
            let point_rng = rng.derive(1 + gi as u64);
            let outcome = cv_point(d, &blocks, point, pipeline, &point_rng);
            ReportEntry {
                epsilon: point.privacy.map(|b| b.epsilon()),
                delta: point.privacy.map(|b| b.delta()),
                k: point.k,
                preprocessing: tag.clone(),
                rmsecv: outcome.as_ref().ok().copied(),
                rmsep: None,
                r2p: None,
                seed: rng.seed(),
                repeat: 0,
                failed: outcome.err().map(|e| e.to_string()),
            }
        })
        .collect();

    let best = entries
        .iter()
        .enumerate()
        .filter_map(|(i, e)| e.rmsecv.map(|v| (i, v, e.k)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.2.cmp(&b.2)))
        .map(|(i, _, _)| i);
    let mut report = EvalReport {
        entries,
        aggregation: Vec::new(),
        best,
    };
    report.aggregate();
    Ok(report)
}

fn cv_point(
    d: &Dataset,
    blocks: &[Vec<usize>],
    point: &GridPoint,
    pipeline: &Pipeline,
    rng: &RngStream,
) -> Result<f64> {
    let mut sse = 0.0;
    let mut count = 0usize;
    for (fi, held_out) in blocks.iter().enumerate() {
        let train_rows: Vec<usize> = blocks
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != fi)
            .flat_map(|(_, b)| b.iter().copied())
            .collect();
        let train = d.select_rows(&train_rows);
        let test = d.select_rows(held_out);
        let (e, _) = fit_and_score(&train, &test, point, pipeline, rng.derive(fi as u64))?;
        sse += e * e * held_out.len() as f64;
        count += held_out.len();
    }
    Ok((sse / count as f64).sqrt())
}

/// RMSEP and R^2 on `test` for the non-private model and for `repeats` private
/// fits at each epsilon. Repeat `r` at epsilon index `i` draws its noise from
/// `rng.derive(i * repeats + r + 1)`; the baseline uses stream 0.
#[allow(clippy::too_many_arguments)]
pub fn privacy_utility_sweep(
    train: &Dataset,
    test: &Dataset,
    eps_list: &[f64],
    delta: f64,
    k: usize,
    placement: NoisePlacement,
    pipeline: &Pipeline,
    repeats: usize,
    rng: &RngStream,
) -> Result<EvalReport> {
    if repeats == 0 && !eps_list.is_empty() {
        return Err(Error::Argument("repeats must be positive".into()));
    }
    let budgets: Vec<PrivacyBudget> = eps_list
        .iter()
        .map(|&e| PrivacyBudget::new(e, delta))
        .collect::<Result<_>>()?;
    let tag = pipeline.tag();

    let mut jobs: Vec<(Option<PrivacyBudget>, usize, u64)> = vec![(None, 0, 0)];
    for (i, b) in budgets.iter().enumerate() {
        for r in 0..repeats {
            jobs.push((Some(*b), r, (i * repeats + r + 1) as u64));
        }
    }
    let entries: Vec<ReportEntry> = jobs
        .par_iter()
        .map(|&(budget, repeat, stream)| {
            let point = GridPoint {
                k,
                privacy: budget,
                placement,
            };
            let outcome = fit_and_score(train, test, &point, pipeline, rng.derive(stream));
            let (rmsep, r2p, failed) = match outcome {
                Ok((e, r2)) => (Some(e), r2, None),
                Err(err) => (None, None, Some(err.to_string())),
            };
            ReportEntry {
                epsilon: budget.map(|b| b.epsilon()),
                delta: budget.map(|b| b.delta()),
                k,
                preprocessing: tag.clone(),
                rmsecv: None,
                rmsep,
                r2p,
                seed: rng.seed(),
                repeat,
                failed,
            }
        })
        .collect();
    let mut report = EvalReport {
        entries,
        aggregation: Vec::new(),
        best: None,
    };
    report.aggregate();
    Ok(report)
}
