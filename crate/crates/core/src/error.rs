use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("scene error: {0}")]
    Scene(String),

    #[error("failed to parse scene file {path}: {source}")]
    SceneParse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("invalid image file {path}: {reason}")]
    Image { path: PathBuf, reason: String },

    #[error("invalid field file: {0}")]
    FieldFile(String),

    #[error("training diverged: {0}")]
    TrainingDiverged(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
