use thiserror::Error;

/// Errors shared across the solver, sampler and determinant modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("singularity in {what} at layer {layer}, node {node}")]
    Singular {
        what: &'static str,
        layer: usize,
        node: usize,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("infeasible Monte Carlo configuration: {0}")]
    Infeasible(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
