use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Range argument outside the measurement model's domain.
    #[error("range {r} outside model domain (must exceed {min})")]
    Domain { r: f64, min: f64 },

    #[error("sensor {index}: {source}")]
    Sensor {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Smallest eigenvalue is not simple, so `1/lambda_min` has no unique gradient.
    #[error("smallest eigenvalue not simple (gap {gap:e})")]
    DegenerateEig { gap: f64 },

    #[error("consensus weights invalid: {0}")]
    Weight(String),

    #[error("config: {0}")]
    Config(String),

    #[error("tick {tick}, agent {agent}: {source}")]
    Step {
        tick: usize,
        agent: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
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

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn at_sensor(self, index: usize) -> Self {
        Error::Sensor { index, source: Box::new(self) }
    }

    pub fn at_step(self, tick: usize, agent: usize) -> Self {
        Error::Step { tick, agent, source: Box::new(self) }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
