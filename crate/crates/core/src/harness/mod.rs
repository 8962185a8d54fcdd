//! Experiment harness: configuration, protocol runners, summaries.

pub mod calibrate;
pub mod config;
pub mod reference;
pub mod scenarios;
pub mod summary;

use std::path::Path;

use thiserror::Error;

pub use calibrate::{calibrate_from_plant, CalibrationRun};
pub use config::{load_config, parse_config, LoadedConfig, Protocol, Scenario, ScenarioKind};
pub use scenarios::{condition_seed, run_scenario};
pub use summary::{summarize, Manifest, RunSummary, SummaryFormat};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration `{field}`: {reason}")]
    Validation { field: String, reason: String },
    #[error("configuration parse error: {0}")]
    Parse(String),
    #[error("{0}")]
    Runtime(String),
    #[error("bad log data: {0}")]
    Data(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Errors caused by the user's input rather than by running it.
    pub fn is_validation(&self) -> bool {
        matches!(self, HarnessError::Validation { .. } | HarnessError::Parse(_))
    }

    /// Process exit code: 1 for invalid input, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        if self.is_validation() {
            1
        } else {
            2
        }
    }
}

macro_rules! runtime_from {
    ($($t:ty),*) => {
        $(impl From<$t> for HarnessError {
            fn from(e: $t) -> Self {
                HarnessError::Runtime(e.to_string())
            }
        })*
    };
}

runtime_from!(
    crate::plant::PlantError,
    crate::control::ControlError,
    crate::calib::CalibError,
    crate::sensing::SensingError,
    crate::kinematics::KinematicsError,
    crate::types::DomainError
);
