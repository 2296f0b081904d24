use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("non-finite value at tau = {tau}, node {node}")]
    NonFinite { tau: f64, node: usize },
    #[error("aliasing: band-limit exceeded (tail coefficient {0:e})")]
    Aliasing(f64),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
