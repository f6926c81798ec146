use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at record {record}: {message}")]
    Parse { record: usize, message: String },

    #[error("duplicate session id `{0}`")]
    DuplicateSession(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("session `{0}` has an empty constant-current phase")]
    EmptyCc(String),

    #[error("feature selection error: {0}")]
    Selection(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("prediction error: {0}")]
    Prediction(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("balance error: {0}")]
    Balance(String),

    #[error("subsample error: {0}")]
    Subsample(String),

    #[error("distribution error: {0}")]
    Distribution(String),

    #[error("aggregation error: {0}")]
    Aggregation(String),

    #[error("suite error: {0}")]
    Suite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
