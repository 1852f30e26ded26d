use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure class, used by front-ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("zero distance between antenna {antenna} and the evaluation point")]
    Singularity { antenna: usize },

    #[error("could not place {k} users with spacing {min_spacing} m after {attempts} rejections")]
    PlacementInfeasible {
        k: usize,
        min_spacing: f64,
        attempts: usize,
    },

    #[error("degenerate channel: zero vector")]
    DegenerateChannel,

    #[error("rank-deficient matrix: numerical rank {rank} < {cols} columns")]
    RankDeficient { rank: usize, cols: usize },

    #[error("precoding vector fully suppressed (lies in the suppression subspace)")]
    FullySuppressed,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("information not granted: {0}")]
    NotGranted(String),

    #[error("no data")]
    NoData,

    #[error("unidentifiable phase offset: phasor sum vanishes")]
    Unidentifiable,

    #[error("offset table has no entry for tx {tx}, rx {rx}")]
    Coverage { tx: usize, rx: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("{path}: unsupported format version {found} (expected {expected})")]
    Version {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("inconsistent dataset: {0}")]
    Consistency(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Error {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping any context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self.root() {
            Error::Config(_) | Error::NotGranted(_) | Error::Domain(_) => ErrorClass::Config,
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::Version { .. }
            | Error::Consistency(_)
            | Error::Coverage { .. }
            | Error::NoData
            | Error::Dimension(_) => ErrorClass::Data,
            Error::Singularity { .. }
            | Error::PlacementInfeasible { .. }
            | Error::DegenerateChannel
            | Error::RankDeficient { .. }
            | Error::FullySuppressed
            | Error::Unidentifiable => ErrorClass::Numerical,
            Error::Context { .. } => unreachable!("root() strips context"),
        }
    }
}
