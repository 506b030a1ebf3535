use std::io;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] taba_core::Error),
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("corrupt CIFAR file: {0}")]
    CorruptCifar(String),
    #[error("bad file format: {0}")]
    Format(String),
}

impl Error {
    /// Whether the error comes from an invalid configuration rather than a
    /// failure while running.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Core(taba_core::Error::InvalidConfig(_)))
    }
}
