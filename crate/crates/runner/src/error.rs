use std::path::PathBuf;

use rydpass::adiabatic::AdiabaticError;
use rydpass::forster::ForsterError;
use rydpass::gates::GateError;
use rydpass::hamiltonians::HamiltonianError;
use rydpass::propagator::PropagationError;
use rydpass::pulses::PulseError;
use rydpass::statespace::StateError;
use thiserror::Error;

/// Process exit status for a failed command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Io = 1,
    Config = 2,
    Integration = 3,
}

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("config error: {0}")]
    Config(String),
    #[error("unknown preset `{name}`; available: {}", crate::presets::PRESET_NAMES.join(", "))]
    UnknownPreset { name: String },
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl RunnerError {
    pub fn config(msg: impl Into<String>) -> Self {
        RunnerError::Config(msg.into())
    }

    pub fn exit_status(&self) -> ExitStatus {
        match self {
            RunnerError::Config(_) | RunnerError::UnknownPreset { .. } => ExitStatus::Config,
            RunnerError::Integration(_) => ExitStatus::Integration,
            RunnerError::Io { .. } => ExitStatus::Io,
        }
    }
}

// Building a model from config values can only fail on the values
// themselves, so these map to config errors.
macro_rules! config_error_from {
    ($($ty:ty),*) => {$(
        impl From<$ty> for RunnerError {
            fn from(e: $ty) -> Self {
                RunnerError::Config(e.to_string())
            }
        }
    )*};
}

macro_rules! integration_error_from {
    ($($ty:ty),*) => {$(
        impl From<$ty> for RunnerError {
            fn from(e: $ty) -> Self {
                RunnerError::Integration(e.to_string())
            }
        }
    )*};
}

config_error_from!(
    PulseError,
    StateError,
    HamiltonianError,
    toml::de::Error,
    toml::ser::Error
);
integration_error_from!(PropagationError, AdiabaticError, GateError, ForsterError);

pub type Result<T, E = RunnerError> = std::result::Result<T, E>;
