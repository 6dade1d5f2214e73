use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid PHY configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Channel(#[from] ferlink_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
