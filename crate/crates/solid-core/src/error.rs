use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("covariance matrix is not positive definite (jitter up to {max_jitter:e} failed)")]
    NotPositiveDefinite { max_jitter: f64 },

    #[error("no variable survives global selection; cannot fit an empty model")]
    EmptyModel,

    #[error("dataset error: {0}")]
    Dataset(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
