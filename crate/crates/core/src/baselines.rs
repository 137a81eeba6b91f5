//! Reference multiplies used as oracles and as benchmark comparisons.
//!
//! Rows are partitioned across the ambient worker pool (see
//! [`parallel::with_workers`]); each output cell
//! is reduced in ascending `k` order in `f64`, so results do not depend on the
//! worker count.

use crate::error::{shape_mismatch, Error, Result};
use crate::kernel::OpCounters;
use crate::matrix::{DenseMatrix, Real};
use crate::packing::unpack_word_into;
use crate::parallel;

/// A baseline result with its operation tallies.
#[derive(Clone, Debug)]
pub struct BaselineOutput<T> {
    pub y: DenseMatrix<T>,
    pub counters: OpCounters,
    /// False for outputs that are deliberately numerically meaningless.
    pub valid_for_correctness: bool,
}

const ROW_CHUNK: usize = 16;

fn dense_rows<T: Real>(a: &[T], n: usize, x: &DenseMatrix<T>, y: &mut [f64]) {
    let b = x.cols();
    let xs = x.as_slice();
    let rows = y.len() / b;
    for r in 0..rows {
        let out = &mut y[r * b..(r + 1) * b];
        for (k, &aik) in a[r * n..(r + 1) * n].iter().enumerate() {
            let aik = aik.as_f64();
            for (o, &xkj) in out.iter_mut().zip(&xs[k * b..(k + 1) * b]) {
                *o += aik * xkj.as_f64();
            }
        }
    }
}

/// Triple-loop `A · X` with `f64` accumulation; counts `m·n·b` multiply-adds.
pub fn gemm_dense<T: Real>(a: &DenseMatrix<T>, x: &DenseMatrix<T>) -> Result<BaselineOutput<T>> {
    let (m, n) = a.shape();
    if x.rows() != n {
        return Err(shape_mismatch(format!("input with {n} rows"), format!("{} rows", x.rows())));
    }
    let b = x.cols();
    let mut acc = vec![0.0f64; m * b];
    if b > 0 {
        let src = a.as_slice();
        parallel::for_each_chunk_mut(&mut acc, ROW_CHUNK * b, true, |ci, chunk| {
            let r0 = ci * ROW_CHUNK;
            dense_rows(&src[r0 * n..], n, x, chunk);
        });
    }
    Ok(BaselineOutput {
        y: DenseMatrix::from_raw(m, b, acc.into_iter().map(T::from_f64).collect()),
        counters: OpCounters { fma_ops: (m * n * b) as u64, ..Default::default() },
        valid_for_correctness: true,
    })
}

fn check_words(words: &[u32], m: usize, n: usize, x_rows: usize) -> Result<usize> {
    let per_row = n.div_ceil(32);
    if words.len() != m * per_row {
        return Err(Error::LengthMismatch { expected: m * per_row, got: words.len() });
    }
    if x_rows != n {
        return Err(shape_mismatch(format!("input with {n} rows"), format!("{x_rows} rows")));
    }
    Ok(per_row)
}

/// Expands an `m x n` packed plane word by word into a dense `±1` matrix.
pub fn unpack_plane<T: Real>(words: &[u32], m: usize, n: usize) -> Result<DenseMatrix<T>> {
    let per_row = n.div_ceil(32);
    if words.len() != m * per_row {
        return Err(Error::LengthMismatch { expected: m * per_row, got: words.len() });
    }
    let mut data = vec![T::zero(); m * n];
    if n > 0 {
        for (r, row) in data.chunks_mut(n).enumerate() {
            for (w, lanes) in row.chunks_mut(32).enumerate() {
                unpack_word_into(words[r * per_row + w], lanes);
            }
        }
    }
    Ok(DenseMatrix::from_raw(m, n, data))
}

/// Unpacks the plane, then runs [`gemm_dense`] on the `±1` matrix.
pub fn gemm_unpack<T: Real>(words: &[u32], m: usize, n: usize, x: &DenseMatrix<T>) -> Result<BaselineOutput<T>> {
    check_words(words, m, n, x.rows())?;
    let signs = unpack_plane::<T>(words, m, n)?;
    gemm_dense(&signs, x)
}

/// Multiplies each packed word, read as a plain number, against its 32-row
/// input fragment without unpacking. The values are meaningless; only the
/// memory traffic of packed weights is representative. The fragment is reduced
/// once up front, so each `(row, word, col)` costs one multiply-add.
pub fn gemm_bandwidth_probe<T: Real>(
    words: &[u32],
    m: usize,
    n: usize,
    x: &DenseMatrix<T>,
) -> Result<BaselineOutput<T>> {
    let per_row = check_words(words, m, n, x.rows())?;
    let b = x.cols();
    let mut fragments = vec![0.0f64; per_row * b];
    for k in 0..n {
        let frag = &mut fragments[(k / 32) * b..(k / 32 + 1) * b];
        for (f, v) in frag.iter_mut().zip(x.row(k)) {
            *f += v.as_f64();
        }
    }
    let mut acc = vec![0.0f64; m * b];
    if b > 0 {
        let fragments = &fragments;
        parallel::for_each_chunk_mut(&mut acc, ROW_CHUNK * b, true, |ci, chunk| {
            for (rl, out) in chunk.chunks_mut(b).enumerate() {
                let r = ci * ROW_CHUNK + rl;
                for (w, &word) in words[r * per_row..(r + 1) * per_row].iter().enumerate() {
                    let scalar = word as f64;
                    for (o, f) in out.iter_mut().zip(&fragments[w * b..(w + 1) * b]) {
                        *o += scalar * f;
                    }
                }
            }
        });
    }
    Ok(BaselineOutput {
        y: DenseMatrix::from_raw(m, b, acc.into_iter().map(T::from_f64).collect()),
        counters: OpCounters {
            fma_ops: (m * per_row * b) as u64,
            accumulate_ops: (n * b) as u64,
            ..Default::default()
        },
        valid_for_correctness: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packing::{pack_plane_words, BinaryPlane};

    fn naive(a: &DenseMatrix<f64>, x: &DenseMatrix<f64>) -> DenseMatrix<f64> {
        let mut out = Vec::new();
        for i in 0..a.rows() {
            for j in 0..x.cols() {
                let mut s = 0.0f64;
                for k in 0..a.cols() {
                    s += a.get(i, k) * x.get(k, j);
                }
                out.push(s);
            }
        }
        DenseMatrix::from_vec(a.rows(), x.cols(), out).unwrap()
    }

    #[test]
    fn identity_and_scalar() {
        let x = DenseMatrix::from_fn(3, 2, |r, c| r as f64 * 2.0 - c as f64);
        assert_eq!(gemm_dense(&DenseMatrix::identity(3), &x).unwrap().y, x);
        let one = |v: f64| DenseMatrix::from_vec(1, 1, vec![v]).unwrap();
        let out = gemm_dense(&one(2.0), &one(3.0)).unwrap();
        assert_eq!(out.y.as_slice(), &[6.0]);
        assert_eq!(out.counters.fma_ops, 1);
    }

    #[test]
    fn matches_independent_loop_bitwise() {
        let a = DenseMatrix::from_fn(8, 8, |r, c| ((r * 13 + c * 7) % 17) as f64 / 3.0 - 2.5);
        let x = DenseMatrix::from_fn(8, 3, |r, c| ((r * 5 + c * 11) % 19) as f64 / 7.0 - 1.25);
        let out = gemm_dense(&a, &x).unwrap();
        assert!(out.y.bitwise_eq(&naive(&a, &x)));
        assert_eq!(out.counters.fma_ops, 8 * 8 * 3);
    }

    #[test]
    fn zero_words_give_negated_column_sums() {
        let x = DenseMatrix::from_fn(40, 2, |r, c| r as f64 + c as f64 * 0.5);
        let words = vec![0u32; 3 * 2];
        let out = gemm_unpack(&words, 3, 40, &x).unwrap();
        for r in 0..3 {
            for c in 0..2 {
                let col_sum: f64 = (0..40).map(|k| x.get(k, c)).sum();
                assert_eq!(out.y.get(r, c), -col_sum);
            }
        }
    }

    #[test]
    fn unpack_plane_inverts_packing() {
        let plane = BinaryPlane::from_fn(3, 45, |r, c| (r ^ c) % 3 == 1);
        let dense = unpack_plane::<f32>(&pack_plane_words(&plane), 3, 45).unwrap();
        assert_eq!(dense, plane.to_dense::<f32>());
    }

    #[test]
    fn length_checks() {
        let x = DenseMatrix::<f64>::zeros(33, 1);
        assert!(matches!(gemm_unpack(&[0; 3], 2, 33, &x), Err(Error::LengthMismatch { expected: 4, got: 3 })));
        assert!(matches!(gemm_unpack(&[0; 4], 2, 32, &x), Err(Error::LengthMismatch { .. })));
        assert!(matches!(
            gemm_dense(&DenseMatrix::<f64>::zeros(2, 3), &DenseMatrix::zeros(4, 1)),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn probe_is_flagged_and_counted() {
        let x = DenseMatrix::from_fn(64, 4, |r, c| (r + c) as f64);
        let out = gemm_bandwidth_probe(&[7u32; 8 * 2], 8, 64, &x).unwrap();
        assert!(!out.valid_for_correctness);
        assert_eq!(out.counters.fma_ops, 8 * 2 * 4);
    }
}
