use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cloud {cloud:?}: ground truth has {gt} labels but prediction has {pred}")]
    LengthMismatch { cloud: String, gt: u64, pred: u64 },

    #[error("cloud {cloud:?}: instance array has {inst} entries but ground truth has {gt}")]
    InstanceLengthMismatch { cloud: String, gt: u64, inst: u64 },

    #[error("cloud {cloud:?}: {array} label {label} at index {index} is out of range for {num_categories} categories")]
    LabelOutOfRange {
        cloud: String,
        array: &'static str,
        index: u64,
        label: u32,
        num_categories: u32,
    },

    #[error("cloud {cloud:?}: prediction at index {index} equals the ignore id {ignore_id}")]
    PredictedIgnore { cloud: String, index: u64, ignore_id: u32 },

    #[error("cloud {cloud:?}: instance id {instance} is set on ignored point at index {index}")]
    InstanceOnIgnored { cloud: String, index: u64, instance: u32 },

    #[error("duplicate cloud id {0:?}")]
    DuplicateCloud(String),

    #[error("config mismatch: {0}")]
    ConfigMismatch(String),

    #[error("dataset contains no point clouds")]
    EmptyDataset,

    #[error("dataset contains no valid (non-ignored) points")]
    NoValidPoints,

    #[error("cannot allocate false positives over an empty instance list")]
    EmptyInstances,

    #[error("{}: {message}", path.display())]
    Manifest { path: PathBuf, message: String },

    #[error("{}: {message} ({location})", path.display())]
    Parse {
        path: PathBuf,
        location: String,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid synthetic dataset spec: {0}")]
    Spec(String),

    #[error("rank comparison: {0}")]
    Comparison(String),

    #[error("writing {}: {source}", path.display())]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from the environment rather than from the inputs.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Write { .. })
    }
}
