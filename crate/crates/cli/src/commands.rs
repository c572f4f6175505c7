use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::Serialize;

use edpls::attack::{orthogonal_complement_weights, score};
use edpls::eval::{kfold_cv, privacy_utility_sweep, r2_score, rmse, EvalReport, GridPoint};
use edpls::experiments::{streams, CalibrationStudy};
use edpls::io::{
    read_dataset, read_features, read_vector, write_dataset, write_matrix, write_text,
    write_vector, CsvOptions,
};
use edpls::mechanism::{NoiseCalibration, NoiseTarget};
use edpls::{
    simulate_two_holders, train_test_split, Dataset, Error, FitConfig, NoisePlacement, Pipeline,
    PlsModel, PrivacyBudget, Result, RngStream, SignalSpec,
};

use crate::config::{self, Settings};
use crate::settings::*;

fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| Error::Argument(format!("missing --{flag}")))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(serde_json::from_str(&text)?)
}

fn parse_pipeline(s: &str) -> Result<Pipeline> {
    s.parse()
}

/// `;` separates alternative pipelines.
fn parse_pipelines(s: &str) -> Result<Vec<Pipeline>> {
    s.split(';').map(|p| parse_pipeline(p.trim())).collect()
}

fn resolve<S: Settings, F: Serialize>(cfg: Option<&Path>, flags: &F) -> Result<S> {
    config::resolve(cfg, flags)
}

fn dataset_opts(header: bool, response_col: usize) -> CsvOptions {
    CsvOptions {
        has_header: header,
        response_col: Some(response_col),
    }
}

/// Pipeline saved next to a model, if any.
fn sibling_pipeline(model: &Path) -> Result<Option<Pipeline>> {
    let path = model.with_file_name("pipeline.json");
    if path.exists() {
        read_json(&path).map(Some)
    } else {
        Ok(None)
    }
}

fn apply(pipeline: Option<&Pipeline>, x: Array2<f64>) -> Result<Array2<f64>> {
    match pipeline {
        Some(p) => p.transform(&x),
        None => Ok(x),
    }
}

// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct Manifest<'a> {
    seed: u64,
    data_stream: u64,
    samples_per_holder: usize,
    channels: usize,
    signals: &'a [SignalSpec; 4],
    files: Vec<&'static str>,
}

pub fn simulate(cfg: Option<&Path>, flags: &SimulateFlags) -> Result<()> {
    let s: SimulateSettings = resolve(cfg, flags)?;
    let out = required(&s.output, "output")?;
    create_dir(out)?;
    let data = simulate_two_holders(s.n, s.m, &mut RngStream::new(s.seed, streams::DATA))?;
    write_dataset(&out.join("holder1.csv"), &data.holder1, s.header)?;
    write_dataset(&out.join("holder2.csv"), &data.holder2, s.header)?;
    write_dataset(&out.join("combined.csv"), &data.combined(), s.header)?;
    // holder 2's unique band, the attack's ground truth
    write_matrix(
        &out.join("unique_signal.csv"),
        data.signals[3].view().insert_axis(ndarray::Axis(0)),
    )?;
    write_json(
        &out.join("manifest.json"),
        &Manifest {
            seed: s.seed,
            data_stream: streams::DATA,
            samples_per_holder: s.n,
            channels: s.m,
            signals: &data.specs,
            files: vec!["holder1.csv", "holder2.csv", "combined.csv", "unique_signal.csv"],
        },
    )?;
    config::write_into_dir(out, "simulate", &s)?;
    Ok(())
}

// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct CalibrationSummary {
    target: NoiseTarget,
    releases: usize,
    min_sigma: f64,
    max_sigma: f64,
    max_sensitivity: f64,
}

fn summarize(log: &[NoiseCalibration]) -> Vec<CalibrationSummary> {
    [
        NoiseTarget::Weights,
        NoiseTarget::Scores,
        NoiseTarget::XLoadings,
        NoiseTarget::YLoading,
    ]
    .into_iter()
    .filter_map(|target| {
        let rows: Vec<&NoiseCalibration> = log.iter().filter(|c| c.target == target).collect();
        if rows.is_empty() {
            return None;
        }
        Some(CalibrationSummary {
            target,
            releases: rows.len(),
            min_sigma: rows.iter().map(|c| c.sigma).fold(f64::INFINITY, f64::min),
            max_sigma: rows.iter().map(|c| c.sigma).fold(0.0, f64::max),
            max_sensitivity: rows.iter().map(|c| c.sensitivity).fold(0.0, f64::max),
        })
    })
    .collect()
}

#[derive(Serialize)]
struct FitReport {
    k: usize,
    requested_k: usize,
    early_stopped: bool,
    epsilon: Option<f64>,
    delta: Option<f64>,
    placement: NoisePlacement,
    pipeline: String,
    samples: usize,
    channels: usize,
    training_rmse: f64,
    training_r2: Option<f64>,
    calibration_entries: usize,
    calibration: Vec<CalibrationSummary>,
    seed: u64,
}

pub fn fit(cfg: Option<&Path>, flags: &FitFlags) -> Result<()> {
    let s: FitSettings = resolve(cfg, flags)?;
    let input = required(&s.input, "input")?;
    let out = required(&s.output, "output")?;
    let data = read_dataset(input, dataset_opts(s.header, s.response_col))?;
    let mut pipeline = parse_pipeline(&s.pipeline)?;
    let x = pipeline.fit_transform(data.x())?;
    let data = data.with_x(x)?;

    let privacy = s
        .epsilon
        .map(|e| PrivacyBudget::new(e, s.delta))
        .transpose()?;
    let fit_cfg = match privacy {
        Some(b) => FitConfig::private(s.k, b, RngStream::new(s.seed, streams::NOISE)),
        None => FitConfig::baseline(s.k),
    }
    .with_placement(s.placement.into());
    let model = edpls::fit(&data, &fit_cfg)?;

    let yhat = model.predict(data.x().view())?;
    let report = FitReport {
        k: model.k,
        requested_k: model.requested_k,
        early_stopped: model.early_stopped,
        epsilon: privacy.map(|b| b.epsilon()),
        delta: privacy.map(|b| b.delta()),
        placement: model.placement,
        pipeline: pipeline.tag(),
        samples: data.n_samples(),
        channels: data.n_channels(),
        training_rmse: rmse(data.y().view(), yhat.view())?,
        training_r2: r2_score(data.y().view(), yhat.view()).ok(),
        calibration_entries: model.calibration_log.len(),
        calibration: summarize(&model.calibration_log),
        seed: s.seed,
    };

    create_dir(out)?;
    model.save(&out.join("model.json"))?;
    write_json(&out.join("pipeline.json"), &pipeline)?;
    write_json(&out.join("fit_report.json"), &report)?;
    config::write_into_dir(out, "fit", &s)?;
    Ok(())
}

// ---------------------------------------------------------------------------

pub fn predict(cfg: Option<&Path>, flags: &PredictFlags) -> Result<()> {
    let s: PredictSettings = resolve(cfg, flags)?;
    let model_path = required(&s.model, "model")?;
    let input = required(&s.input, "input")?;
    let out = required(&s.output, "output")?;
    let model = PlsModel::load(model_path)?;
    let pipeline = match &s.pipeline_state {
        Some(p) => Some(read_json::<Pipeline>(p)?),
        None => sibling_pipeline(model_path)?,
    };
    let opts = CsvOptions {
        has_header: s.header,
        response_col: (!s.no_response).then_some(s.response_col),
    };
    let x = read_features(input, opts)?;
    if x.ncols() != model.n_channels() {
        return Err(Error::Shape(format!(
            "{}: the model expects {} channels, the input has {}",
            input.display(),
            model.n_channels(),
            x.ncols()
        )));
    }
    let x = apply(pipeline.as_ref(), x)?;
    let yhat = model.predict(x.view())?;
    write_vector(out, "prediction", yhat.view())?;
    config::write_beside(out, "predict", &s)?;
    Ok(())
}

// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct Projection {
    /// Global components with the local span removed, one per column.
    residual: Array2<f64>,
    column_norms: Vec<f64>,
    similarity: Option<Vec<f64>>,
    best_component: Option<usize>,
}

#[derive(Serialize)]
struct AttackOutput {
    k: usize,
    global_epsilon: Option<f64>,
    local_samples: usize,
    weights: Projection,
    loadings: Projection,
}

fn project(
    global: &Array2<f64>,
    local: &Array2<f64>,
    truth: Option<&Array1<f64>>,
) -> Result<Projection> {
    let residual = orthogonal_complement_weights(global.view(), local.view())?;
    let column_norms = residual
        .columns()
        .into_iter()
        .map(|c| c.dot(&c).sqrt())
        .collect();
    let (similarity, best_component) = match truth {
        Some(t) => {
            let r = score(residual.clone(), t.view());
            (Some(r.per_component_similarity), Some(r.component_argmax))
        }
        None => (None, None),
    };
    Ok(Projection {
        residual,
        column_norms,
        similarity,
        best_component,
    })
}

fn read_truth(path: &Path, m: usize) -> Result<Array1<f64>> {
    let truth = match read_vector(path, false) {
        Err(Error::Parse { line: 1, .. }) => read_vector(path, true)?,
        other => other?,
    };
    if truth.len() != m {
        return Err(Error::Shape(format!(
            "{}: truth signal has {} values, the model has {m} channels",
            path.display(),
            truth.len()
        )));
    }
    Ok(truth)
}

pub fn attack(cfg: Option<&Path>, flags: &AttackFlags) -> Result<()> {
    let s: AttackSettings = resolve(cfg, flags)?;
    let model_path = required(&s.model, "model")?;
    let input = required(&s.input, "input")?;
    let out = required(&s.output, "output")?;
    let global = PlsModel::load(model_path)?;
    if let Some(k) = s.k {
        if k != global.k {
            return Err(Error::Config(format!(
                "--k {k} does not match the global model's {} components",
                global.k
            )));
        }
    }
    let local_data = read_dataset(input, dataset_opts(s.header, s.response_col))?;
    if local_data.n_channels() != global.n_channels() {
        return Err(Error::Shape(format!(
            "{}: the model has {} channels, the local data {}",
            input.display(),
            global.n_channels(),
            local_data.n_channels()
        )));
    }
    let pipeline = sibling_pipeline(model_path)?;
    let x = apply(pipeline.as_ref(), local_data.x().clone())?;
    let local_data: Dataset = local_data.with_x(x)?;
    let local = edpls::fit(&local_data, &FitConfig::baseline(global.k))?;
    let truth = s
        .truth
        .as_deref()
        .map(|p| read_truth(p, global.n_channels()))
        .transpose()?;

    let output = AttackOutput {
        k: global.k,
        global_epsilon: global.privacy.map(|b| b.epsilon()),
        local_samples: local_data.n_samples(),
        weights: project(&global.weights, &local.weights, truth.as_ref())?,
        loadings: project(&global.x_loadings, &local.x_loadings, truth.as_ref())?,
    };
    write_json(out, &output)?;
    config::write_beside(out, "attack", &s)?;
    Ok(())
}

// ---------------------------------------------------------------------------

fn merge(reports: Vec<EvalReport>, pick_best: bool) -> EvalReport {
    let mut merged = EvalReport {
        entries: reports.into_iter().flat_map(|r| r.entries).collect(),
        ..EvalReport::default()
    };
    if pick_best {
        merged.best = merged
            .entries
            .iter()
            .enumerate()
            .filter_map(|(i, e)| e.rmsecv.map(|v| (i, v, e.k)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.2.cmp(&b.2)))
            .map(|(i, _, _)| i);
    }
    merged.aggregate();
    merged
}

fn write_report(dir: &Path, stem: &str, report: &EvalReport) -> Result<()> {
    write_json(&dir.join(format!("{stem}.json")), report)?;
    write_text(&dir.join(format!("{stem}.csv")), &report.to_csv_string())
}

fn all_failed(report: &EvalReport) -> bool {
    !report.entries.is_empty() && report.entries.iter().all(|e| e.failed.is_some())
}

/// Lowest-RMSECV non-private k in a CV report, ties to the smaller k.
fn best_baseline_k(cv: &EvalReport) -> Option<usize> {
    cv.entries
        .iter()
        .filter(|e| e.epsilon.is_none())
        .filter_map(|e| e.rmsecv.map(|v| (e.k, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(k, _)| k)
}

pub fn sweep(cfg: Option<&Path>, flags: &SweepFlags) -> Result<()> {
    let s: SweepSettings = resolve(cfg, flags)?;
    let out = required(&s.output, "output")?;
    let opts = dataset_opts(s.header, s.response_col);
    let data = match &s.input {
        Some(p) => read_dataset(p, opts)?,
        None => simulate_two_holders(s.n, s.m, &mut RngStream::new(s.seed, streams::DATA))?
            .combined(),
    };
    let pipelines = parse_pipelines(&s.pipeline)?;
    let placement: NoisePlacement = s.placement.into();
    create_dir(out)?;

    if s.mode == SweepMode::Study {
        if s.test_input.is_some() {
            return Err(Error::Config(
                "study mode draws its own split; drop --test-input".into(),
            ));
        }
        let study = CalibrationStudy {
            folds: s.folds,
            test_fraction: s.test_fraction,
            max_k: s.k_max,
            eps_list: s.epsilons.clone(),
            delta: s.delta,
            repeats: s.repeats,
            placement,
        };
        let rep = study.run(&data, &pipelines, s.seed)?;
        write_json(&out.join("study.json"), &rep)?;
        write_text(&out.join("study_cv.csv"), &merge(rep.cv.clone(), true).to_csv_string())?;
        write_text(&out.join("study_test.csv"), &rep.test.to_csv_string())?;
        config::write_into_dir(out, "sweep", &s)?;
        if all_failed(&rep.test) {
            return Err(Error::Numerical("every study entry failed".into()));
        }
        return Ok(());
    }

    let (train, test) = match &s.test_input {
        Some(p) => (data, read_dataset(p, opts)?),
        None => train_test_split(&data, s.test_fraction, &mut RngStream::new(s.seed, streams::SPLIT))?,
    };
    let mut budgets: Vec<Option<PrivacyBudget>> = vec![None];
    for &e in &s.epsilons {
        budgets.push(Some(PrivacyBudget::new(e, s.delta)?));
    }

    let mut cv_reports = Vec::new();
    let mut total_failure = false;
    if matches!(s.mode, SweepMode::Both | SweepMode::Cv) {
        if s.k_max == 0 {
            return Err(Error::Argument("the search grid is empty (k_max = 0)".into()));
        }
        let grid: Vec<GridPoint> = budgets
            .iter()
            .flat_map(|&privacy| {
                (1..=s.k_max).map(move |k| GridPoint {
                    k,
                    privacy,
                    placement,
                })
            })
            .collect();
        for p in &pipelines {
            cv_reports.push(kfold_cv(&train, s.folds, &grid, p, &RngStream::new(s.seed, streams::CV))?);
        }
        let merged = merge(cv_reports.clone(), true);
        total_failure |= all_failed(&merged);
        write_report(out, "cv", &merged)?;
    }

    if matches!(s.mode, SweepMode::Both | SweepMode::Utility) {
        let mut reports = Vec::new();
        for (pi, p) in pipelines.iter().enumerate() {
            let k = match (s.k, cv_reports.get(pi)) {
                (Some(k), _) => k,
                (None, Some(cv)) => best_baseline_k(cv).ok_or_else(|| {
                    Error::Numerical("no baseline grid point succeeded in cross-validation".into())
                })?,
                (None, None) => {
                    return Err(Error::Argument("the utility sweep needs --k".into()));
                }
            };
            reports.push(privacy_utility_sweep(
                &train,
                &test,
                &s.epsilons,
                s.delta,
                k,
                placement,
                p,
                s.repeats,
                &RngStream::new(s.seed, streams::SWEEP),
            )?);
        }
        let merged = merge(reports, false);
        total_failure |= all_failed(&merged);
        write_report(out, "utility", &merged)?;
    }
    config::write_into_dir(out, "sweep", &s)?;
    if total_failure {
        return Err(Error::Numerical("every sweep entry failed".into()));
    }
    Ok(())
}

// ---------------------------------------------------------------------------

pub fn preprocess(cfg: Option<&Path>, flags: &PreprocessFlags) -> Result<()> {
    let s: PreprocessSettings = resolve(cfg, flags)?;
    let input = required(&s.input, "input")?;
    let out = required(&s.output, "output")?;
    let mut pipeline = parse_pipeline(&s.pipeline)?;
    let opts = CsvOptions {
        has_header: s.header,
        response_col: (!s.no_response).then_some(s.response_col),
    };

    let run = |path: &Path, dest: &Path, pipeline: &mut Pipeline, fit: bool| -> Result<()> {
        if s.no_response {
            let x = read_features(path, opts)?;
            let x = if fit { pipeline.fit_transform(&x)? } else { pipeline.transform(&x)? };
            write_matrix(dest, x.view())
        } else {
            let d = read_dataset(path, opts)?;
            let x = if fit {
                pipeline.fit_transform(d.x())?
            } else {
                pipeline.transform(d.x())?
            };
            write_dataset(dest, &d.with_x(x)?, s.header)
        }
    };

    run(input, out, &mut pipeline, true)?;
    match (&s.test_input, &s.test_output) {
        (Some(ti), Some(to)) => run(ti, to, &mut pipeline, false)?,
        (None, None) => {}
        _ => {
            return Err(Error::Argument(
                "--test-input and --test-output go together".into(),
            ))
        }
    }
    if let Some(path) = &s.state_output {
        write_json(path, &pipeline)?;
    }
    config::write_beside(out, "preprocess", &s)?;
    Ok(())
}
