use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Invalid construction parameters (sieve limit, memory cap, replica counts).
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{what} = {value} is outside the supported range (limit {limit})")]
    Range {
        what: &'static str,
        value: f64,
        limit: u64,
    },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("resource limit exceeded: {0}")]
    Resource(String),
}

pub type Result<T> = std::result::Result<T, Error>;
