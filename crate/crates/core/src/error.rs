use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid measure: {0}")]
    Measure(String),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("backend `{backend}` does not support tail `{tail}`")]
    Backend { backend: &'static str, tail: String },
    #[error("descent violated at iteration {iter}: energy rose from {before:e} to {after:e}")]
    DescentViolated { iter: usize, before: f64, after: f64 },
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("not monotone: {0}")]
    NotMonotone(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
