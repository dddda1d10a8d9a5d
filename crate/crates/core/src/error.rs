//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of a closed-form expression.
    #[error("domain error: {0}")]
    Domain(String),

    /// Input data violate an operation's precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration value is missing or unusable. `key` is the dotted path.
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("matrix is not symmetric (max |H - H^T| = {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    /// Square-root branch selection yielded a negative damping rate.
    #[error("branch selection produced a negative rate: kappa_plus = {kappa_plus:e}, kappa_minus = {kappa_minus:e}")]
    BranchSelection { kappa_plus: f64, kappa_minus: f64 },

    #[error("no resonance found: dip depth {depth:e} is below the detection threshold {threshold:e}")]
    NoResonance { depth: f64, threshold: f64 },

    #[error("fit did not converge: {0}")]
    NotConverged(String),

    #[error("background segments do not cover {lo_hz:.6e}..{hi_hz:.6e} Hz")]
    CoverageGap { lo_hz: f64, hi_hz: f64 },

    #[error("grid of {cells} cells exceeds the budget of {budget} cells")]
    GridTooLarge { cells: usize, budget: usize },

    #[error("time step {dt:e} s exceeds the stability bound {bound:e} s")]
    StepTooLarge { dt: f64, bound: f64 },

    #[error("integration failure: {0}")]
    Integration(String),

    #[error("unknown device id `{0}`")]
    UnknownDevice(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for failures of a numerical procedure as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotConverged(_)
                | Error::NoResonance { .. }
                | Error::Integration(_)
                | Error::BranchSelection { .. }
        )
    }
}
