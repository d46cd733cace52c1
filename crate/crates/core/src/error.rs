use thiserror::Error;

use crate::metrics::ResponseClass;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("state component {component} = {value}: must be finite and non-negative")]
    InvalidState { component: &'static str, value: f64 },

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("invalid integrator config: {0}")]
    IntegratorConfig(String),

    #[error("invalid metrics config: {0}")]
    MetricsConfig(String),

    #[error("integration failed at t = {t}: {reason}")]
    StepFailure { t: f64, reason: String },

    #[error("dosing segment {segment} failed: {source}")]
    Segment {
        segment: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid dose schedule: {0}")]
    Schedule(String),

    #[error("both bracket endpoints classify as {0:?}")]
    SameClass(ResponseClass),

    #[error("invalid bracket: {0}")]
    Bracket(String),

    #[error("invalid fit spec: {0}")]
    FitSpec(String),

    #[error("fit infeasible: every probed point gave no response")]
    Infeasible,

    #[error("config error: {0}")]
    Config(String),

    #[error("{0}")]
    Plot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
