//! End-to-end scenarios on the simulated two-holder data, shared by the CLI
//! and the acceptance tests.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::attack::{attack_and_score, AttackReport};
use crate::datagen::simulate_two_holders;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::{
    fit_and_score, kfold_cv, privacy_utility_sweep, train_test_split, EvalReport, GridPoint,
    ReportEntry,
};
use crate::mechanism::PrivacyBudget;
use crate::pls::{fit, FitConfig, NoisePlacement};
use crate::preprocess::Pipeline;
use crate::rng::RngStream;

/// Stream ids under one master seed. Fixed so that runs at different epsilon
/// share the data and noise streams (paired comparisons).
pub mod streams {
    pub const DATA: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const SPLIT: u64 = 3;
    pub const SWEEP: u64 = 4;
    pub const CV: u64 = 5;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackScenario {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub delta: f64,
    pub placement: NoisePlacement,
}

impl Default for AttackScenario {
    fn default() -> Self {
        Self {
            n: 100,
            m: 100,
            k: 3,
            delta: crate::eval::DEFAULT_DELTA,
            placement: NoisePlacement::default(),
        }
    }
}

/// Holder 1 attacking holder 2's unique band, once through the weights and
/// once through the x-loadings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackTrial {
    pub seed: u64,
    pub epsilon: Option<f64>,
    pub weights: AttackReport,
    pub loadings: AttackReport,
}

impl AttackScenario {
    /// Simulate both holders from `seed`, fit the global model on the stacked
    /// data (private when `epsilon` is given) and a non-private local model on
    /// holder 1, then score the projection against band 4.
    pub fn run(&self, seed: u64, epsilon: Option<f64>) -> Result<AttackTrial> {
        let data = simulate_two_holders(self.n, self.m, &mut RngStream::new(seed, streams::DATA))?;
        let global_cfg = match epsilon {
            Some(e) => FitConfig::private(
                self.k,
                PrivacyBudget::new(e, self.delta)?,
                RngStream::new(seed, streams::NOISE),
            ),
            None => FitConfig::baseline(self.k),
        }
        .with_placement(self.placement);
        let global = fit(&data.combined(), &global_cfg)?;
        let local = fit(&data.holder1, &FitConfig::baseline(self.k))?;
        let truth = &data.signals[3];
        Ok(AttackTrial {
            seed,
            epsilon,
            weights: attack_and_score(global.weights.view(), local.weights.view(), truth.view())?,
            loadings: attack_and_score(
                global.x_loadings.view(),
                local.x_loadings.view(),
                truth.view(),
            )?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityScenario {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub delta: f64,
    pub test_fraction: f64,
    pub repeats: usize,
    pub placement: NoisePlacement,
}

impl Default for UtilityScenario {
    fn default() -> Self {
        Self {
            n: 100,
            m: 100,
            k: 3,
            delta: crate::eval::DEFAULT_DELTA,
            test_fraction: 0.3,
            repeats: 1,
            placement: NoisePlacement::default(),
        }
    }
}

impl UtilityScenario {
    /// One seed: simulate, stack, split 70/30, then sweep epsilon on the split.
    pub fn run(&self, seed: u64, eps_list: &[f64], pipeline: &Pipeline) -> Result<EvalReport> {
        let data = simulate_two_holders(self.n, self.m, &mut RngStream::new(seed, streams::DATA))?;
        let (train, test) = train_test_split(
            &data.combined(),
            self.test_fraction,
            &mut RngStream::new(seed, streams::SPLIT),
        )?;
        privacy_utility_sweep(
            &train,
            &test,
            eps_list,
            self.delta,
            self.k,
            self.placement,
            pipeline,
            self.repeats,
            &RngStream::new(seed, streams::SWEEP),
        )
    }
}

/// The split / cross-validate / test workflow used on real spectra: hold out a
/// test set, pick the component count per (epsilon, pipeline) by k-fold
/// RMSECV on the training part, then refit on all training rows and report
/// RMSEP at the chosen count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationStudy {
    pub folds: usize,
    pub test_fraction: f64,
    pub max_k: usize,
    pub eps_list: Vec<f64>,
    pub delta: f64,
    pub repeats: usize,
    pub placement: NoisePlacement,
}

impl Default for CalibrationStudy {
    fn default() -> Self {
        Self {
            folds: 10,
            test_fraction: 0.3,
            max_k: 10,
            eps_list: vec![1.0, 10.0, 100.0],
            delta: crate::eval::DEFAULT_DELTA,
            repeats: 1,
            placement: NoisePlacement::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    /// One cross-validation report per pipeline, in input order.
    pub cv: Vec<EvalReport>,
    /// Held-out results at the selected component counts.
    pub test: EvalReport,
}

impl CalibrationStudy {
    /// Largest usable k given the training size, fold count and channels.
    pub fn usable_k(&self, n_train: usize, m: usize) -> usize {
        let largest_fold = n_train.div_ceil(self.folds.max(1));
        let fit_rows = n_train.saturating_sub(largest_fold);
        self.max_k.min(fit_rows.saturating_sub(1)).min(m)
    }

    pub fn run(&self, data: &Dataset, pipelines: &[Pipeline], seed: u64) -> Result<StudyReport> {
        if pipelines.is_empty() {
            return Err(Error::Argument("no preprocessing pipelines given".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Argument("repeats must be positive".into()));
        }
        let (train, test) = train_test_split(
            data,
            self.test_fraction,
            &mut RngStream::new(seed, streams::SPLIT),
        )?;
        let k_max = self.usable_k(train.n_samples(), train.n_channels());
        if k_max == 0 {
            return Err(Error::Degenerate(format!(
                "{} training rows are too few for {}-fold cross-validation",
                train.n_samples(),
                self.folds
            )));
        }
        let mut settings: Vec<Option<PrivacyBudget>> = vec![None];
        for &e in &self.eps_list {
            settings.push(Some(PrivacyBudget::new(e, self.delta)?));
        }
        let grid: Vec<GridPoint> = settings
            .iter()
            .flat_map(|&privacy| {
                (1..=k_max).map(move |k| GridPoint {
                    k,
                    privacy,
                    placement: self.placement,
                })
            })
            .collect();

        let cv_rng = RngStream::new(seed, streams::CV);
        let noise = RngStream::new(seed, streams::NOISE);
        let mut cv_reports = Vec::with_capacity(pipelines.len());
        let mut test_entries = Vec::new();
        for pipeline in pipelines {
            let cv = kfold_cv(&train, self.folds, &grid, pipeline, &cv_rng)?;
            for (si, &privacy) in settings.iter().enumerate() {
                let block = &cv.entries[si * k_max..(si + 1) * k_max];
                let chosen = block
                    .iter()
                    .filter_map(|e| e.rmsecv.map(|v| (e.k, v)))
                    .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
                let runs = if privacy.is_some() { self.repeats } else { 1 };
                for r in 0..runs {
                    let mut entry = ReportEntry {
                        epsilon: privacy.map(|b| b.epsilon()),
                        delta: privacy.map(|b| b.delta()),
                        k: 0,
                        preprocessing: pipeline.tag(),
                        rmsecv: None,
                        rmsep: None,
                        r2p: None,
                        seed,
                        repeat: r,
                        failed: None,
                    };
                    match chosen {
                        None => entry.failed = Some("every component count failed in CV".into()),
                        Some((k, cv_err)) => {
                            entry.k = k;
                            entry.rmsecv = Some(cv_err);
                            let point = GridPoint {
                                k,
                                privacy,
                                placement: self.placement,
                            };
                            let rng = noise.derive((si * self.repeats + r) as u64);
                            match fit_and_score(&train, &test, &point, pipeline, rng) {
                                Ok((e, r2)) => {
                                    entry.rmsep = Some(e);
                                    entry.r2p = r2;
                                }
                                Err(err) => entry.failed = Some(err.to_string()),
                            }
                        }
                    }
                    test_entries.push(entry);
                }
            }
            cv_reports.push(cv);
        }
        let mut test_report = EvalReport {
            entries: test_entries,
            ..EvalReport::default()
        };
        test_report.aggregate();
        Ok(StudyReport {
            cv: cv_reports,
            test: test_report,
        })
    }
}

/// Band 4 as a column, handy for writing the attack truth signal.
pub fn unique_band(m: usize) -> Array1<f64> {
    crate::datagen::gaussian_signal(m, &crate::datagen::DEFAULT_SIGNALS[3])
}

/// Merge per-seed reports into one, re-aggregating.
pub fn merge_reports(reports: Vec<EvalReport>) -> EvalReport {
    let mut merged = EvalReport {
        entries: reports.into_iter().flat_map(|r| r.entries).collect(),
        ..EvalReport::default()
    };
    merged.aggregate();
    merged
}

/// Best-component similarities of a batch of trials: (weights, loadings).
pub fn best_similarities(trials: &[AttackTrial]) -> (Vec<f64>, Vec<f64>) {
    trials
        .iter()
        .map(|t| (t.weights.best_similarity(), t.loadings.best_similarity()))
        .unzip()
}
