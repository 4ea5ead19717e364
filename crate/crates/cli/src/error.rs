use std::path::Path;

use thiserror::Error;

use hawkes_regen::concentration::ConcentrationError;
use hawkes_regen::estimators::EstimatorError;
use hawkes_regen::queue::QueueError;
use hawkes_regen::regen::RegenError;
use hawkes_regen::simulate::SimError;
use hawkes_regen::transfer::TransferError;
use hawkes_regen::validate::ValidateError;

pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_VALIDATION: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    /// A numeric error raised by one of the library modules, e.g. `QueueError::OutOfDomain`.
    #[error("{name}: {message}")]
    Domain { name: String, message: String },
    #[error("cannot access {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => EXIT_CONFIG,
            _ => EXIT_RUNTIME,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.display().to_string(), source }
    }
}

/// `Type::Variant` of a library error, read off its `Debug` form.
fn qualified_name<E: std::fmt::Debug>(type_name: &str, e: &E) -> String {
    let debug = format!("{e:?}");
    let variant = debug.split(['(', '{', ' ']).next().unwrap_or_default();
    format!("{type_name}::{variant}")
}

macro_rules! domain_errors {
    ($($ty:ident),*) => {$(
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                Self::Domain { name: qualified_name(stringify!($ty), &e), message: e.to_string() }
            }
        }
    )*};
}

domain_errors!(TransferError, SimError, RegenError, QueueError, EstimatorError, ConcentrationError, ValidateError);

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Output(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Output(e.to_string())
    }
}
