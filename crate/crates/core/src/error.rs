use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),

    #[error("mode at {mode_hz} Hz is not below waveguide cutoff {cutoff_hz} Hz")]
    NotEvanescent { mode_hz: f64, cutoff_hz: f64 },

    #[error("rank-deficient design: near-dependent columns {columns:?}")]
    RankDeficient { columns: Vec<String> },

    #[error("singular normal matrix: {0}")]
    Singular(String),

    #[error("infeasible bounds for {name}: lower {lower} > upper {upper}")]
    InfeasibleBounds { name: String, lower: f64, upper: f64 },

    #[error("insufficient signal: {0}")]
    InsufficientSnr(String),

    #[error("unstable step size: {0}")]
    UnstableStep(String),

    #[error("fit did not converge (best reduced chi-square {best_reduced_chi2:e})")]
    NonConvergence { best_reduced_chi2: f64 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("empty intersection: {0}")]
    EmptyIntersection(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient { .. }
                | Error::Singular(_)
                | Error::InsufficientSnr(_)
                | Error::NonConvergence { .. }
                | Error::DegenerateGeometry(_)
                | Error::EmptyIntersection(_)
                | Error::DivisionByZero(_)
        )
    }
}
