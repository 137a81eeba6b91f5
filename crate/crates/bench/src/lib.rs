//! Benchmark sweeps and self-verification for the `biqgemm` kernels.

pub mod config;
pub mod data;
pub mod error;
pub mod harness;
pub mod verify;

pub use config::{BenchConfig, Method, Scenario, DEFAULT_SEED};
pub use error::BenchError;
pub use harness::{run_benchmark, write_csv, Measurement, Prepared, Record};
pub use verify::{verify, VerifyConfig, VerifyReport};
