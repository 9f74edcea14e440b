use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("scene infeasible: {0}")]
    SceneInfeasible(String),

    #[error("no valid start pose after {attempts} attempts")]
    NoValidStartPose { attempts: usize },

    #[error("invalid depth {0} (must be > 0)")]
    InvalidDepth(f64),

    #[error("invalid logits: {0}")]
    InvalidLogits(String),

    #[error("invalid features: {0}")]
    InvalidFeatures(String),

    #[error("invalid soft target: {0}")]
    InvalidSoftTarget(String),

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("empty mask")]
    EmptyMask,

    #[error("no training data")]
    NoTrainingData,

    #[error("dataset/trajectory mismatch: {labels} label frames vs {frames} trajectory frames")]
    DatasetMismatch { labels: usize, frames: usize },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("stage `{stage}` failed (config {config_hash}): {source}")]
    Stage {
        stage: &'static str,
        config_hash: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
