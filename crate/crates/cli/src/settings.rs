//! Per-command flags and their resolved settings.
//!
//! Flags are all optional so that only the ones given on the command line
//! override the config file. Settings carry the defaults.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use edpls::NoisePlacement;
use serde::{Deserialize, Serialize};

use crate::config::Settings;

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    Raw,
    Normalized,
}

impl From<Placement> for NoisePlacement {
    fn from(p: Placement) -> Self {
        match p {
            Placement::Raw => NoisePlacement::Raw,
            Placement::Normalized => NoisePlacement::Normalized,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// k-fold CV on the training part, then the privacy-utility sweep.
    Both,
    Cv,
    Utility,
    /// Per-pipeline CV model selection followed by held-out testing.
    Study,
}

// ---------------------------------------------------------------------------

#[derive(Debug, Args, Serialize)]
pub struct SimulateFlags {
    /// Samples per holder [default: 100]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Spectral channels [default: 100]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    /// Master seed [default: 0]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Output directory (created if missing)
    #[arg(long, short)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Write a header row
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub header: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSettings {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub header: bool,
}

impl Default for SimulateSettings {
    fn default() -> Self {
        Self {
            n: 100,
            m: 100,
            seed: 0,
            output: None,
            header: false,
        }
    }
}

impl Settings for SimulateSettings {
    const KEYS: &'static [&'static str] = &["n", "m", "seed", "output", "header"];
}

// ---------------------------------------------------------------------------

#[derive(Debug, Args, Serialize)]
pub struct FitFlags {
    /// Training CSV
    #[arg(long, short)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Output directory for model.json, pipeline.json and fit_report.json
    #[arg(long, short)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Column holding the response [default: 0]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub response_col: Option<usize>,
    /// The input has a header row
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub header: bool,
    /// Number of latent variables [default: 3]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Privacy loss per release; omit for the non-private model
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// [default: 0.01]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Master seed for the noise [default: 0]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Preprocessing steps, e.g. "sg:5,2,1|center" [default: raw]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pipeline: Option<String>,
    /// Where weight and score noise is added [default: raw]
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub placement: Option<Placement>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSettings {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub response_col: usize,
    pub header: bool,
    pub k: usize,
    pub epsilon: Option<f64>,
    pub delta: f64,
    pub seed: u64,
    pub pipeline: String,
    pub placement: Placement,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            input: None,
            output: None,
            response_col: 0,
            header: false,
            k: 3,
            epsilon: None,
            delta: edpls::eval::DEFAULT_DELTA,
            seed: 0,
            pipeline: "raw".into(),
            placement: Placement::Raw,
        }
    }
}

impl Settings for FitSettings {
    const KEYS: &'static [&'static str] = &[
        "input",
        "output",
        "response_col",
        "header",
        "k",
        "epsilon",
        "delta",
        "seed",
        "pipeline",
        "placement",
    ];
}

// ---------------------------------------------------------------------------

#[derive(Debug, Args, Serialize)]
pub struct PredictFlags {
    /// model.json written by `fit`
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    /// Fitted pipeline [default: pipeline.json beside the model, if present]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pipeline_state: Option<PathBuf>,
    /// Spectra to predict
    #[arg(long, short)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Predictions CSV
    #[arg(long, short)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Response column to drop from the input [default: 0]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub response_col: Option<usize>,
    /// The input holds spectra only
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub no_response: bool,
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub header: bool,
    /// Accepted for uniformity; prediction draws no randomness
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictSettings {
    pub model: Option<PathBuf>,
    pub pipeline_state: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub response_col: usize,
    pub no_response: bool,
    pub header: bool,
    pub seed: u64,
}

impl Settings for PredictSettings {
    const KEYS: &'static [&'static str] = &[
        "model",
        "pipeline_state",
        "input",
        "output",
        "response_col",
        "no_response",
        "header",
        "seed",
    ];
}

// ---------------------------------------------------------------------------

#[derive(Debug, Args, Serialize)]
pub struct AttackFlags {
    /// Global model.json
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    /// The attacker's own data
    #[arg(long, short)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Optional ground-truth signal (one row or one column) to score against
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<PathBuf>,
    /// Report JSON
    #[arg(long, short)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Expected component count; must match the global model
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub response_col: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub header: bool,
    /// Accepted for uniformity; the attack draws no randomness
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackSettings {
    pub model: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub k: Option<usize>,
    pub response_col: usize,
    pub header: bool,
    pub seed: u64,
}

impl Settings for AttackSettings {
    const KEYS: &'static [&'static str] = &[
        "model",
        "input",
        "truth",
        "output",
        "k",
        "response_col",
        "header",
        "seed",
    ];
}

// ---------------------------------------------------------------------------

#[derive(Debug, Args, Serialize)]
pub struct SweepFlags {
    /// Dataset CSV; the simulated two-holder data when omitted
    #[arg(long, short)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Explicit test set instead of a random split
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_input: Option<PathBuf>,
    /// Output directory
    #[arg(long, short)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<SweepMode>,
    /// Components for the utility sweep [default: best baseline k from CV]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// CV grid covers k = 1..=k_max [default: 10]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    /// Comma-separated privacy losses [default: 1,10,100]
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// One or more pipelines separated by `;` [default: raw]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pipeline: Option<String>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub placement: Option<Placement>,
    /// [default: 10]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub folds: Option<usize>,
    /// [default: 0.3]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_fraction: Option<f64>,
    /// Private fits per epsilon [default: 20]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repeats: Option<usize>,
    /// Simulated samples per holder when no input is given [default: 100]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Simulated channels when no input is given [default: 100]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub response_col: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub header: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    pub input: Option<PathBuf>,
    pub test_input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub mode: SweepMode,
    pub k: Option<usize>,
    pub k_max: usize,
    pub epsilons: Vec<f64>,
    pub delta: f64,
    pub seed: u64,
    pub pipeline: String,
    pub placement: Placement,
    pub folds: usize,
    pub test_fraction: f64,
    pub repeats: usize,
    pub n: usize,
    pub m: usize,
    pub response_col: usize,
    pub header: bool,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            input: None,
            test_input: None,
            output: None,
            mode: SweepMode::Both,
            k: None,
            k_max: 10,
            epsilons: vec![1.0, 10.0, 100.0],
            delta: edpls::eval::DEFAULT_DELTA,
            seed: 0,
            pipeline: "raw".into(),
            placement: Placement::Raw,
            folds: 10,
            test_fraction: 0.3,
            repeats: 20,
            n: 100,
            m: 100,
            response_col: 0,
            header: false,
        }
    }
}

impl Settings for SweepSettings {
    const KEYS: &'static [&'static str] = &[
        "input",
        "test_input",
        "output",
        "mode",
        "k",
        "k_max",
        "epsilons",
        "delta",
        "seed",
        "pipeline",
        "placement",
        "folds",
        "test_fraction",
        "repeats",
        "n",
        "m",
        "response_col",
        "header",
    ];
}

// ---------------------------------------------------------------------------

#[derive(Debug, Args, Serialize)]
pub struct PreprocessFlags {
    /// Spectra the pipeline is fitted on
    #[arg(long, short)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Transformed copy of the input
    #[arg(long, short)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// e.g. "msc|center"
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pipeline: Option<String>,
    /// Further spectra transformed with the fitted state, without refitting
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_input: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_output: Option<PathBuf>,
    /// Save the fitted pipeline as JSON
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state_output: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub response_col: Option<usize>,
    /// The inputs hold spectra only
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub no_response: bool,
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub header: bool,
    /// Accepted for uniformity; preprocessing draws no randomness
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSettings {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub pipeline: String,
    pub test_input: Option<PathBuf>,
    pub test_output: Option<PathBuf>,
    pub state_output: Option<PathBuf>,
    pub response_col: usize,
    pub no_response: bool,
    pub header: bool,
    pub seed: u64,
}

impl Default for PreprocessSettings {
    fn default() -> Self {
        Self {
            input: None,
            output: None,
            pipeline: "raw".into(),
            test_input: None,
            test_output: None,
            state_output: None,
            response_col: 0,
            no_response: false,
            header: false,
            seed: 0,
        }
    }
}

impl Settings for PreprocessSettings {
    const KEYS: &'static [&'static str] = &[
        "input",
        "output",
        "pipeline",
        "test_input",
        "test_output",
        "state_output",
        "response_col",
        "no_response",
        "header",
        "seed",
    ];
}
