use std::path::PathBuf;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("image is {width}x{height}, need at least {min}x{min}")]
    ImageTooSmall { width: usize, height: usize, min: usize },
    #[error("rectangle (top={top}, left={left}, h={height}, w={width}) exceeds {img_width}x{img_height} image")]
    RectOutOfBounds {
        top: usize,
        left: usize,
        height: usize,
        width: usize,
        img_width: usize,
        img_height: usize,
    },
    #[error("kernel must be odd-sized in both dimensions, got {width}x{height}")]
    EvenKernel { width: usize, height: usize },
    #[error("homography is singular")]
    SingularHomography,
    #[error("descriptor window must be {expected}x{expected}, got {width}x{height}")]
    WrongWindowSize { expected: usize, width: usize, height: usize },
    #[error("{kind} descriptor must have {expected} values, got {actual}")]
    DimensionContract { kind: &'static str, expected: usize, actual: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid labeled set: {0}")]
    InvalidLabeledSet(String),
    #[error("loss became non-finite during training")]
    NonFiniteLoss,
    #[error("invalid hyperparameter: {0}")]
    InvalidParameter(String),
    #[error("dataset contains no valid samples")]
    EmptyDataset,
    #[error("bad class label directory {0:?}")]
    BadLabel(String),
    #[error("class {class} has {count} samples, need at least {min}")]
    ClassTooSmall { class: usize, count: usize, min: usize },
    #[error("degenerate point configuration")]
    DegenerateConfiguration,
    #[error("could not find four form corners")]
    CornersNotFound,
    #[error("form does not match grid spec: {0}")]
    SpecMismatch(String),
    #[error("label vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Format { what, reason: reason.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
