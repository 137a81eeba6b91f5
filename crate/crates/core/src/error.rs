use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("quantization bits must be at least 1")]
    InvalidBeta,

    #[error("matrix must have at least one row and one column")]
    EmptyMatrix,

    #[error("non-finite value {value} at ({row}, {col})")]
    NonFinite { row: usize, col: usize, value: f64 },

    #[error("data length {len} does not match {rows}x{cols}")]
    DataLength { rows: usize, cols: usize, len: usize },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("LUT-unit {0} outside supported range 1..={max}", max = crate::packing::MAX_MU)]
    MuOutOfRange(usize),

    #[error("working-set budget of {budget} bytes cannot hold one group of tables ({needed} bytes)")]
    BudgetTooSmall { needed: usize, budget: usize },

    #[error("tile {t_w}x{t_h} needs {needed} bytes of tables, budget is {budget}")]
    TileExceedsBudget { t_w: usize, t_h: usize, needed: usize, budget: usize },

    #[error("invalid tile shape {t_w}x{t_h}")]
    InvalidTile { t_w: usize, t_h: usize },

    #[error("inconsistent planes: {0}")]
    InconsistentPlanes(String),

    #[error("packed word count {got} does not match expected {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("bad magic {0:?}, expected \"BQGM\"")]
    BadMagic([u8; 4]),

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),

    #[error("truncated model: need {needed} bytes, have {got}")]
    Truncated { needed: usize, got: usize },

    #[error("{0} trailing bytes after model payload")]
    TrailingBytes(usize),

    #[error("invalid header field: {0}")]
    InvalidHeader(String),

    #[error("key {key} at plane {plane}, row {row}, group {group} does not fit in {mu} bits")]
    KeyOutOfRange { plane: usize, row: usize, group: usize, key: u32, mu: usize },

    #[error("padding bits set in key at plane {plane}, row {row}")]
    PadBitsSet { plane: usize, row: usize },

    #[error("invalid scaling factor {value} at plane {plane}, row {row}")]
    InvalidAlpha { plane: usize, row: usize, value: f32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn shape_mismatch(expected: impl Into<String>, got: impl Into<String>) -> Error {
    Error::ShapeMismatch { expected: expected.into(), got: got.into() }
}
