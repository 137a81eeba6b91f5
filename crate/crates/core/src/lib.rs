//! Matrix multiplication for binary-coding quantized weights using lookup
//! tables instead of sign multiplications.
//!
//! A weight matrix is approximated as `W ≈ Σ_i α_i ∘ B_i` with sign planes
//! `B_i` ([`quantizer`]). Each plane is packed into `mu`-bit keys
//! ([`packing`]); at inference time the kernel builds tables of every signed
//! sum of each `mu`-length input sub-vector ([`lut`]) and replaces the inner
//! products with one lookup per key ([`kernel`]).
//!
//! ```
//! use biqgemm::{biqgemm, quantize_greedy, DenseMatrix, KernelConfig};
//!
//! let w = DenseMatrix::<f32>::from_rows(&[vec![3.0, 1.0], vec![-3.0, -1.0]])?;
//! let q = quantize_greedy(&w, 2)?.pack(2)?;
//! let x = DenseMatrix::identity(2);
//! let out = biqgemm(&q, &x, &KernelConfig::default())?;
//! assert_eq!(out.y, w);
//! # Ok::<(), biqgemm::Error>(())
//! ```

pub mod baselines;
pub mod error;
pub mod kernel;
pub mod lut;
pub mod matrix;
pub mod model_io;
pub mod packing;
pub mod parallel;
pub mod quantizer;

pub use baselines::{gemm_bandwidth_probe, gemm_dense, gemm_unpack, BaselineOutput};
pub use error::{Error, Result};
pub use kernel::{biqgemm, biqgemm_plane, plan_tiles, GemmOutput, KernelConfig, OpCounters, PhaseTimes, TileShape};
pub use lut::{build_lut_block, build_lut_dp, build_lut_naive, make_m_mu, LutBlock, LutBuilder, LutLayout};
pub use matrix::{DenseMatrix, Real};
pub use packing::{pack_keys, pack_plane_words, unpack_word, BinaryPlane, KeyMatrix};
pub use quantizer::{dequantize, quantization_error, quantize_greedy, PackedLinear, QuantizedLinear};
