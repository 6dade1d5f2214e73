use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),

    #[error("data: {0}")]
    Data(String),

    #[error(transparent)]
    Core(#[from] ferlink_core::Error),

    #[error(transparent)]
    Phy(#[from] ferlink_phy::Error),

    #[error(transparent)]
    Model(#[from] ferlink_mlp::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

fn core_code(e: &ferlink_core::Error) -> i32 {
    use ferlink_core::Error as E;
    match e {
        E::InvalidPath(_)
        | E::InvalidGrid(_)
        | E::InvalidScenario(_)
        | E::TrajectoryTooShort { .. }
        | E::InvalidConfig(_)
        | E::EmptyRange(_)
        | E::InvalidScheme(_)
        | E::UnknownSource(_) => EXIT_CONFIG,
        _ => EXIT_DATA,
    }
}

impl Error {
    /// Process exit status: 2 config, 3 data, 4 numeric failure.
    pub fn exit_code(&self) -> i32 {
        use ferlink_mlp::Error as M;
        match self {
            Error::Config(_) => EXIT_CONFIG,
            Error::Core(e) => core_code(e),
            Error::Phy(ferlink_phy::Error::Config(_)) => EXIT_CONFIG,
            Error::Phy(ferlink_phy::Error::Channel(e)) => core_code(e),
            Error::Model(M::Config(_)) => EXIT_CONFIG,
            Error::Model(M::Diverged(..) | M::NonFiniteInput) => EXIT_NUMERIC,
            Error::Model(_) => EXIT_DATA,
            Error::Data(_) | Error::Io { .. } | Error::Csv(_) | Error::Json(_) => EXIT_DATA,
        }
    }
}

pub(crate) trait IoContext<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T>;
}

impl<T> IoContext<T> for std::io::Result<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T> {
        self.map_err(|source| Error::Io { path: path.into(), source })
    }
}
