use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown node id `{0}`")]
    UnknownNode(String),

    #[error("unknown link id `{0}`")]
    UnknownLink(String),

    #[error("no path between `{0}` and `{1}`")]
    NoPath(String, String),

    #[error("time {t} s is outside the trace horizon [{start}, {end}] s")]
    TraceExtrapolation { t: f64, start: f64, end: f64 },

    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },

    #[error("{what} out of range: {value}")]
    OutOfRange { what: &'static str, value: f64 },

    #[error("bandwidth must be positive for a transfer-time division, got {0}")]
    DivisionGuard(f64),

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("interval bounds cross: floor {floor} s exceeds cap {cap} s")]
    InfeasibleInterval { floor: f64, cap: f64 },

    #[error("generator cannot reach the requested statistics: {0}")]
    GeneratorInfeasible(String),

    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("instance too large for exhaustive search: {assignments} assignments (limit {limit})")]
    TooLarge { assignments: f64, limit: f64 },

    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            msg: msg.into(),
        }
    }
}

pub(crate) fn ensure_positive(what: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonPositive { what, value })
    }
}
