//! Error mapping, dataset loading, and shared flag plumbing.

use std::path::{Path, PathBuf};

use farmhazard::tuning::CvRule;
use farmhazard::SurvivalDataset;

use crate::DataArgs;

/// Process exit codes, a stable contract: 0 success, 2 for input or
/// configuration problems, 3 for numerical failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Input = 2,
    Numerical = 3,
}

#[derive(Debug)]
pub struct CliError {
    pub message: String,
    pub code: ExitCode,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            code: ExitCode::Input,
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            code: ExitCode::Numerical,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        self.code
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<farmhazard::Error> for CliError {
    fn from(err: farmhazard::Error) -> Self {
        let code = if err.is_input_error() {
            ExitCode::Input
        } else {
            ExitCode::Numerical
        };
        Self {
            message: err.to_string(),
            code,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::input(err.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(err: csv::Error) -> Self {
        CliError::input(err.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(err: serde_json::Error) -> Self {
        CliError::input(err.to_string())
    }
}

pub type CliResult<T = ()> = std::result::Result<T, CliError>;

/// Full round-trip float formatting (17 significant digits) used by every
/// numeric CSV and JSON field the CLI writes.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Loads the dataset named by the schema flags and imputes missing cells
/// by column medians, reporting on standard error when it does.
pub fn load_dataset(data: &DataArgs) -> CliResult<SurvivalDataset> {
    let mut dataset = SurvivalDataset::load_csv(&data.csv, &data.time, &data.status)?;
    if dataset.has_missing() {
        eprintln!(
            "farmhazard: imputing missing covariate cells in {} by column medians",
            data.csv.display()
        );
        dataset.impute_median()?;
    }
    Ok(dataset)
}

/// Resolves the selection-rule flags into a [`CvRule`].
pub fn parse_rule(rule: &str, gamma: f64) -> CliResult<CvRule> {
    match rule {
        "max" => Ok(CvRule::Max),
        "one-se" | "1se" => Ok(CvRule::OneSe),
        "sparse" => {
            if !gamma.is_finite() || gamma < 0.0 {
                return Err(CliError::input(format!(
                    "sparse rule needs a nonnegative finite gamma, got {gamma}"
                )));
            }
            Ok(CvRule::Sparse { gamma })
        }
        other => Err(CliError::input(format!(
            "unknown selection rule {other:?}; expected max, one-se or sparse"
        ))),
    }
}

/// Creates the output directory (if needed) and returns the joined path.
pub fn out_path(dir: &Path, file: &str) -> CliResult<PathBuf> {
    std::fs::create_dir_all(dir)?;
    Ok(dir.join(file))
}
