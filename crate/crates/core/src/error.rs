//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value failed validation. `field` is the dotted path
    /// of the offending key, e.g. `model.thigh.mass`.
    #[error("invalid value for `{field}`: {reason}")]
    Validation { field: String, reason: String },

    /// IK target outside the leg workspace.
    #[error("IK target out of reach: distance {distance:.6} m vs reach {reach:.6} m")]
    OutOfReach { distance: f64, reach: f64 },

    /// Centre of mass is undefined for a massless model.
    #[error("centre of mass undefined: total mass is zero")]
    ZeroMass,

    /// Mass matrix not positive definite at the given state.
    #[error("mass matrix not positive definite ({detail})")]
    Conditioning { detail: String },

    /// Integration produced a non-finite state.
    #[error("simulation diverged at t = {t:.6} s")]
    Diverged { t: f64 },

    /// No foot point is in contact with the ground.
    #[error("no ground contact: {context}")]
    NoContact { context: &'static str },

    /// A gait/controller query that requires a swinging leg was made in
    /// double support.
    #[error("no swing leg: both feet are in stance")]
    NoSwingLeg,

    /// Structured text (gait CSV, rule base, config) failed to parse.
    #[error("{file}:{line}: {reason}")]
    Parse {
        file: String,
        line: usize,
        reason: String,
    },

    /// An inference call was missing a declared input variable.
    #[error("inference input missing: variable `{variable}`")]
    MissingInput { variable: String },

    /// Rule base construction error (unknown variable/term, bad weight...).
    #[error("rule base error: {0}")]
    RuleBase(String),

    /// Interpolation query outside the recorded time range.
    #[error("time {t:.6} s outside recorded range [{first:.6}, {last:.6}]")]
    OutOfRange { t: f64, first: f64, last: f64 },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
