use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("LUT-unit {mu} outside supported range 1..={max}")]
    MuRange { mu: usize, max: usize },

    #[error(transparent)]
    Kernel(#[from] biqgemm::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
