//! `--config` schema. Every section rejects unknown keys; missing keys take
//! the defaults below.

use serde::{Deserialize, Serialize};
use varcycle::model::{NoiseSpec, RawParams};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: Option<RawParams>,
    pub noise: Option<NoiseSpec>,
    pub run: RunSection,
    pub moments: MomentsSection,
    pub cycle: CycleSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    Recursive,
    Explicit,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    #[serde(rename = "T")]
    pub t: usize,
    pub seed: u64,
    pub method: MethodChoice,
    /// `zeros` or `csv:<path>`
    pub z0: String,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            t: 200,
            seed: 0,
            method: MethodChoice::Recursive,
            z0: "zeros".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MomentsSection {
    pub t_grid: Vec<usize>,
    pub tau_grid: Vec<usize>,
    pub mc_reps: usize,
    pub tail_tol: f64,
    /// Covariance of `z0` as rows; zero when absent.
    pub g: Option<Vec<Vec<f64>>>,
}

impl Default for MomentsSection {
    fn default() -> Self {
        Self {
            t_grid: vec![2, 5, 10],
            tau_grid: vec![0, 1],
            mc_reps: 0,
            tail_tol: 1e-12,
            g: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CycleSection {
    pub alpha: f64,
    pub beta: f64,
    #[serde(rename = "T")]
    pub t: usize,
    pub seed: u64,
    pub eps_sd: f64,
    pub eta_sd: f64,
    pub x0: f64,
    pub x1: f64,
    pub analyze: bool,
}

impl Default for CycleSection {
    fn default() -> Self {
        Self {
            alpha: 1.09804,
            beta: 0.7,
            t: 700,
            seed: 0,
            eps_sd: 1.0,
            eta_sd: 1.6,
            x0: 0.0,
            x1: 0.0,
            analyze: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Time-series CSV.
    pub path: Option<String>,
    /// JSON report; stdout when absent.
    pub report: Option<String>,
    /// Directory for matrix CSV dumps.
    pub dump_dir: Option<String>,
}

pub fn load_config(path: &str) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {path}: {e}")))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{path}: {e}")))
}
