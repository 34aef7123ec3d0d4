use thiserror::Error;

pub type Result<T> = std::result::Result<T, F3dcError>;

#[derive(Debug, Error)]
pub enum F3dcError {
    #[error("{op}: shape mismatch along mode {mode}: expected extent {expected}, found {found}")]
    ModeMismatch {
        op: &'static str,
        mode: usize,
        expected: usize,
        found: usize,
    },

    #[error("{op}: shape mismatch: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("transform set does not match layer: {0}")]
    TransformMismatch(String),

    #[error(
        "padding phase mismatch: (k - p - 1) mod s = {found}, but the transform set was calibrated \
         for phase {expected}; adjust p or supply a transform set calibrated for this phase"
    )]
    Phase { expected: usize, found: usize },

    #[error("matrix entry {value} at ({row}, {col}) is not representable for {dtype} arithmetic")]
    NotRepresentable {
        value: String,
        row: usize,
        col: usize,
        dtype: &'static str,
    },

    #[error("value {value} at flat index {index} exceeds the {bits}-bit {what} width")]
    Width {
        what: &'static str,
        bits: u32,
        value: i64,
        index: usize,
    },

    #[error("pre-shift value {value} is not divisible by {divisor} (channel {channel}, flat index {index})")]
    Divisibility {
        value: i64,
        divisor: i64,
        channel: usize,
        index: usize,
    },

    #[error("non-integral value {value} at flat index {index}")]
    NotIntegral { value: f64, index: usize },

    #[error("tensor file parse error at byte offset {offset}: {msg}")]
    TensorParse { offset: usize, msg: String },

    #[error("transform set parse error at line {line}: {msg}")]
    TransformParse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl F3dcError {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        F3dcError::Shape {
            op,
            detail: detail.into(),
        }
    }
}
