use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Io,
    Numerical,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Validation => 1,
            ErrorKind::Io => 2,
            ErrorKind::Numerical => 3,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("{}", config_message(.line, .key, .message))]
    Config {
        line: Option<usize>,
        key: Option<String>,
        message: String,
    },

    #[error("{}:{line}: {message}", .path.display())]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("histogram is empty")]
    EmptyHistogram,

    #[error("accumulator holds no weight")]
    EmptyAccumulator,

    #[error("histogram cutoffs differ ({0} vs {1})")]
    CutoffMismatch(usize, usize),

    #[error("accumulator layouts differ")]
    LayoutMismatch,

    #[error("correlation undefined: {0} marginal has zero variance")]
    UndefinedCorrelation(&'static str),

    #[error("profile has {populated} populated bins, at least {required} required")]
    InsufficientData { populated: usize, required: usize },

    #[error("no peak in profile: {0}")]
    NoPeak(String),

    #[error(
        "fit did not converge after {iterations} iterations \
         (last relative change {last_change:.3e}, damping {damping:.3e})"
    )]
    NonConvergence {
        iterations: usize,
        last_change: f64,
        damping: f64,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

fn config_message(line: &Option<usize>, key: &Option<String>, message: &str) -> String {
    match (line, key) {
        (Some(l), Some(k)) => format!("config line {l}: `{k}`: {message}"),
        (Some(l), None) => format!("config line {l}: {message}"),
        (None, Some(k)) => format!("config: `{k}`: {message}"),
        (None, None) => format!("config: {message}"),
    }
}

impl Error {
    pub fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } => ErrorKind::Io,
            Error::NonConvergence { .. } | Error::NoPeak(_) | Error::InsufficientData { .. } => {
                ErrorKind::Numerical
            }
            Error::UndefinedCorrelation(_) => ErrorKind::Numerical,
            _ => ErrorKind::Validation,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind().exit_code()
    }
}

/// Rejects NaN, infinities and negative values.
pub(crate) fn check_nonneg(name: &str, value: f64) -> Result<()> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::invalid(
            name,
            format!("must be finite and >= 0, got {value}"),
        ));
    }
    Ok(())
}

pub(crate) fn check_positive(name: &str, value: f64) -> Result<()> {
    if !value.is_finite() || value <= 0.0 {
        return Err(Error::invalid(
            name,
            format!("must be finite and > 0, got {value}"),
        ));
    }
    Ok(())
}

pub(crate) fn check_probability(name: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::invalid(
            name,
            format!("must lie in [0, 1], got {value}"),
        ));
    }
    Ok(())
}
