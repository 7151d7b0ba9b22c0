use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while building, simulating, or persisting a network.
#[derive(Debug, Error)]
pub enum Error {
    /// Array lengths disagree with each other or with the network shape.
    #[error("structural mismatch: {0}")]
    Structural(String),

    /// A NaN or infinity showed up in simulation state or an input value.
    #[error("numerical fault: {0}")]
    NumericalFault(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{name} = {value} is outside the allowed range [{min}, {max}]")]
    Range {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    /// Malformed IDX or model file. `offset` is the byte position where parsing failed.
    #[error("{what} at byte offset {offset}")]
    Parse { what: String, offset: u64 },

    #[error("inference impossible: {0}")]
    InferenceImpossible(String),

    /// A design-space candidate failed to train or evaluate.
    #[error("candidate with n_exc = {n_exc} failed: {source}")]
    Candidate {
        n_exc: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn parse(what: impl Into<String>, offset: u64) -> Self {
        Error::Parse {
            what: what.into(),
            offset,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_len(what: &str, got: usize, expected: usize) -> Result<()> {
    if got == expected {
        Ok(())
    } else {
        Err(Error::structural(format!(
            "{what} has length {got}, expected {expected}"
        )))
    }
}
