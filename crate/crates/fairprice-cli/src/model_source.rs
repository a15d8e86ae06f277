//! Resolving the demand model from CLI flags: a built-in family, a named
//! preset, or a saved model file.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use fairprice::demand::Family;
use fairprice::{ingest, DemandModel64};
use serde::{Deserialize, Serialize};

use crate::emit::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Dist {
    Uniform,
    Exponential,
    Logistic,
    Powerlaw,
}

/// Exactly one model source: `--dist` with its family parameters,
/// `--preset`, or `--model-file`.
#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Built-in family: uniform | exponential | logistic | powerlaw.
    #[arg(long, value_enum)]
    pub dist: Option<Dist>,
    /// Uniform upper bound (with --dist uniform).
    #[arg(long)]
    pub a: Option<f64>,
    /// Exponential rate (with --dist exponential).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Logistic scale (with --dist logistic).
    #[arg(long)]
    pub s: Option<f64>,
    /// Logistic location (with --dist logistic).
    #[arg(long)]
    pub mu: Option<f64>,
    /// Power-law shortscale (with --dist powerlaw).
    #[arg(long)]
    pub delta: Option<f64>,
    /// Power-law shape (with --dist powerlaw).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Named fitted model: coke | cake.
    #[arg(long)]
    pub preset: Option<String>,
    /// Saved model file produced by `fit --save-model`.
    #[arg(long, value_name = "PATH")]
    pub model_file: Option<PathBuf>,
}

impl ModelArgs {
    pub fn resolve(&self) -> Result<DemandModel64, CliError> {
        let sources = self.dist.is_some() as u8
            + self.preset.is_some() as u8
            + self.model_file.is_some() as u8;
        if sources != 1 {
            return Err(CliError::config(
                "specify exactly one model source: --dist, --preset, or --model-file",
            ));
        }

        if let Some(dist) = self.dist {
            return self.builtin(dist);
        }
        if let Some(name) = &self.preset {
            return ingest::preset(name).ok_or_else(|| {
                CliError::config(format!(
                    "unknown preset {name:?}; available: {}",
                    ingest::preset_names().join(", ")
                ))
            });
        }
        load_model_file(self.model_file.as_ref().unwrap())
    }

    fn builtin(&self, dist: Dist) -> Result<DemandModel64, CliError> {
        let need = |value: Option<f64>, flag: &str| {
            value.ok_or_else(|| CliError::config(format!("--dist requires {flag}")))
        };
        let reject_unused = |used: &[&str]| -> Result<(), CliError> {
            let all: [(&str, Option<f64>); 6] = [
                ("--a", self.a),
                ("--lambda", self.lambda),
                ("--s", self.s),
                ("--mu", self.mu),
                ("--delta", self.delta),
                ("--alpha", self.alpha),
            ];
            for (flag, value) in all {
                if value.is_some() && !used.contains(&flag) {
                    return Err(CliError::config(format!(
                        "{flag} does not apply to this --dist"
                    )));
                }
            }
            Ok(())
        };
        let model = match dist {
            Dist::Uniform => {
                reject_unused(&["--a"])?;
                DemandModel64::uniform(need(self.a, "--a")?)
            }
            Dist::Exponential => {
                reject_unused(&["--lambda"])?;
                DemandModel64::exponential(need(self.lambda, "--lambda")?)
            }
            Dist::Logistic => {
                reject_unused(&["--s", "--mu"])?;
                DemandModel64::logistic(need(self.s, "--s")?, need(self.mu, "--mu")?)
            }
            Dist::Powerlaw => {
                reject_unused(&["--delta", "--alpha"])?;
                DemandModel64::power_law(need(self.delta, "--delta")?, need(self.alpha, "--alpha")?)
            }
        };
        model.map_err(CliError::from)
    }
}

/// On-disk schema for fitted demand models.
#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum ModelFile {
    TruncatedLogistic {
        a: f64,
        b: f64,
    },
    Mixture {
        intercepts: Vec<f64>,
        weights: Vec<f64>,
        beta: f64,
    },
}

impl ModelFile {
    pub fn from_model(model: &DemandModel64) -> Result<Self, CliError> {
        match model.family() {
            Family::TruncatedLogistic { intercept, slope } => Ok(ModelFile::TruncatedLogistic {
                a: *intercept,
                b: *slope,
            }),
            Family::MixtureLogistic {
                intercepts,
                weights,
                slope,
            } => Ok(ModelFile::Mixture {
                intercepts: intercepts.clone(),
                weights: weights.clone(),
                beta: *slope,
            }),
            _ => Err(CliError::config(
                "only fitted forms (truncated_logistic, mixture) can be saved",
            )),
        }
    }

    pub fn into_model(self) -> Result<DemandModel64, CliError> {
        let model = match self {
            ModelFile::TruncatedLogistic { a, b } => DemandModel64::truncated_logistic(a, b),
            ModelFile::Mixture {
                intercepts,
                weights,
                beta,
            } => DemandModel64::mixture_logistic_weighted(
                intercepts.into_iter().zip(weights).collect(),
                beta,
            ),
        };
        model.map_err(CliError::from)
    }
}

pub fn load_model_file(path: &Path) -> Result<DemandModel64, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let file: ModelFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("invalid model file {}: {e}", path.display())))?;
    file.into_model()
}
