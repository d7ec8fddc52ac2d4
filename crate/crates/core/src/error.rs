use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degenerate segment: endpoints coincide")]
    DegenerateSegment,

    #[error("could not place cuboid {index} after {attempts} attempts")]
    PlacementFailed { index: usize, attempts: usize },

    #[error("point ({x:.3}, {y:.3}) lies outside the grid extent")]
    OutOfGrid { x: f64, y: f64 },

    #[error("user terminal at ({x:.3}, {y:.3}, {z:.3}) lies inside a scatterer")]
    UtInsideScatterer { x: f64, y: f64, z: f64 },

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("channel matrix has zero energy")]
    ZeroChannel,

    #[error("zero-norm column {column} in sample {sample}")]
    ZeroColumn { sample: usize, column: usize },

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("pilot density must lie in (0, 1], got {0}")]
    InvalidDensity(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("valid-cell masks differ at ({row}, {col})")]
    MaskMismatch { row: usize, col: usize },

    #[error("no valid cells in the evaluation region")]
    EmptyRegion,

    #[error("empty input")]
    EmptyInput,

    #[error("format error at byte {offset}: {reason}")]
    Format { offset: usize, reason: String },

    #[error("no points inside the region of interest")]
    EmptyRoi,

    #[error("all points in the region of interest were labeled noise")]
    NoCluster,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed structured text: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(offset: usize, reason: impl Into<String>) -> Self {
        Error::Format {
            offset,
            reason: reason.into(),
        }
    }

    /// True for errors caused by unreadable or malformed inputs rather than
    /// numeric or geometric failures.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::Format { .. } | Error::Io { .. } | Error::Parse(_))
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
