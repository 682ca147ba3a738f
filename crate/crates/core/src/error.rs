use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config violates {rule}: {detail}")]
    ConfigConstraint { rule: String, detail: String },

    #[error("config parse error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("non-finite coefficient value: {0}")]
    NonFinite(String),

    #[error("step rejected by CFL limit ({limit}): dt = {dt:e} exceeds admissible {required:e}")]
    Cfl {
        limit: &'static str,
        dt: f64,
        required: f64,
    },

    #[error("pressure Poisson solve did not converge after {iterations} iterations (residual {residual:e}, target {target:e})")]
    PoissonNoConvergence {
        iterations: usize,
        residual: f64,
        target: f64,
    },

    #[error("invariant breach [{invariant}]: {detail}")]
    InvariantBreach { invariant: &'static str, detail: String },

    #[error("run aborted at t = {t} after {retries} retries: {source}")]
    Aborted {
        t: f64,
        retries: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed snapshot {path:?}: {detail}")]
    Snapshot { path: PathBuf, detail: String },

    #[error("malformed time series: {0}")]
    TimeSeries(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn constraint(rule: &str, detail: impl Into<String>) -> Self {
        Error::ConfigConstraint {
            rule: rule.to_string(),
            detail: detail.into(),
        }
    }
}
