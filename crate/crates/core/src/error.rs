use std::path::PathBuf;

use thiserror::Error;

use crate::geometry::Hop;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The UAV coincides with the BS or the UE at some trajectory angle.
    #[error("degenerate geometry: {hop:?} slant range is zero at theta = {theta} rad")]
    DegenerateGeometry { hop: Hop, theta: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {residual:e})")]
    EigenNoConvergence { sweeps: usize, residual: f64 },

    /// Port scanning does not finish within the block: `N * tau_p >= L / W_band`.
    #[error("causality violation: {ports} ports x {port_time:e} s >= block duration {block_time:e} s")]
    Causality {
        ports: u32,
        port_time: f64,
        block_time: f64,
    },

    #[error("BLER is not monotone in transmit power: {0}")]
    Monotonicity(String),

    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },

    #[error("line {line}: unit mismatch for `{key}`: {detail}")]
    UnitMismatch {
        line: usize,
        key: String,
        detail: String,
    },

    #[error("line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}
