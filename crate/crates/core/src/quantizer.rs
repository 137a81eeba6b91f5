//! Binary-coding quantization with the greedy residual solver.
//!
//! Each row `w` is approximated as `Σ_i α_i b_i` with `b_i ∈ {-1, +1}^n`. The
//! solver fits one plane at a time: `b_i = sign(r)` (with `sign(0) = +1`) and
//! `α_i = mean(|r|)` on the current residual `r`, then subtracts `α_i b_i`.

use crate::error::{shape_mismatch, Error, Result};
use crate::matrix::{DenseMatrix, Real};
use crate::packing::{pack_keys, BinaryPlane, KeyMatrix};
use crate::parallel;

/// `beta` sign planes with per-row scaling factors approximating an `m x n`
/// weight matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedLinear<T> {
    m: usize,
    n: usize,
    planes: Vec<BinaryPlane>,
    alphas: Vec<Vec<T>>,
}

impl<T: Real> QuantizedLinear<T> {
    /// Assembles a quantized layer from explicit planes and scaling vectors.
    pub fn new(planes: Vec<BinaryPlane>, alphas: Vec<Vec<T>>) -> Result<Self> {
        if planes.is_empty() {
            return Err(Error::InvalidBeta);
        }
        if planes.len() != alphas.len() {
            return Err(Error::InconsistentPlanes(format!(
                "{} planes but {} scaling vectors",
                planes.len(),
                alphas.len()
            )));
        }
        let (m, n) = (planes[0].rows(), planes[0].cols());
        if m == 0 || n == 0 {
            return Err(Error::EmptyMatrix);
        }
        for (i, (p, a)) in planes.iter().zip(&alphas).enumerate() {
            if p.rows() != m || p.cols() != n {
                return Err(Error::InconsistentPlanes(format!(
                    "plane {i} is {}x{}, expected {m}x{n}",
                    p.rows(),
                    p.cols()
                )));
            }
            if a.len() != m {
                return Err(Error::InconsistentPlanes(format!("alpha {i} has length {}, expected {m}", a.len())));
            }
            if let Some(r) = a.iter().position(|v| !v.is_finite() || *v < T::zero()) {
                return Err(Error::InvalidAlpha { plane: i, row: r, value: a[r].as_f64() as f32 });
            }
        }
        Ok(Self { m, n, planes, alphas })
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn beta(&self) -> usize {
        self.planes.len()
    }

    pub fn planes(&self) -> &[BinaryPlane] {
        &self.planes
    }

    pub fn alphas(&self) -> &[Vec<T>] {
        &self.alphas
    }

    /// Keeps only the first `beta` planes.
    pub fn truncate(&self, beta: usize) -> Result<Self> {
        if beta == 0 {
            return Err(Error::InvalidBeta);
        }
        let beta = beta.min(self.beta());
        Self::new(self.planes[..beta].to_vec(), self.alphas[..beta].to_vec())
    }

    /// Packs every plane into `mu`-bit keys for the lookup kernel.
    pub fn pack(&self, mu: usize) -> Result<PackedLinear<T>> {
        let keys = self.planes.iter().map(|p| pack_keys(p, mu)).collect::<Result<Vec<_>>>()?;
        PackedLinear::new(keys, self.alphas.clone())
    }
}

/// A quantized layer in kernel-ready form: one [`KeyMatrix`] per plane.
#[derive(Clone, Debug, PartialEq)]
pub struct PackedLinear<T> {
    keys: Vec<KeyMatrix>,
    alphas: Vec<Vec<T>>,
}

impl<T: Real> PackedLinear<T> {
    pub fn new(keys: Vec<KeyMatrix>, alphas: Vec<Vec<T>>) -> Result<Self> {
        if keys.is_empty() {
            return Err(Error::InvalidBeta);
        }
        if keys.len() != alphas.len() {
            return Err(Error::InconsistentPlanes(format!(
                "{} key matrices but {} scaling vectors",
                keys.len(),
                alphas.len()
            )));
        }
        let first = &keys[0];
        for (i, (k, a)) in keys.iter().zip(&alphas).enumerate() {
            if k.m() != first.m() || k.n() != first.n() || k.mu() != first.mu() {
                return Err(Error::InconsistentPlanes(format!(
                    "plane {i} is {}x{} with mu={}, expected {}x{} with mu={}",
                    k.m(),
                    k.n(),
                    k.mu(),
                    first.m(),
                    first.n(),
                    first.mu()
                )));
            }
            if a.len() != k.m() {
                return Err(Error::InconsistentPlanes(format!("alpha {i} has length {}, expected {}", a.len(), k.m())));
            }
        }
        Ok(Self { keys, alphas })
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.keys[0].m()
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.keys[0].n()
    }

    #[inline]
    pub fn mu(&self) -> usize {
        self.keys[0].mu()
    }

    #[inline]
    pub fn groups(&self) -> usize {
        self.keys[0].groups()
    }

    #[inline]
    pub fn beta(&self) -> usize {
        self.keys.len()
    }

    pub fn keys(&self) -> &[KeyMatrix] {
        &self.keys
    }

    pub fn alphas(&self) -> &[Vec<T>] {
        &self.alphas
    }

    /// Decodes the keys back into sign planes.
    pub fn to_quantized(&self) -> Result<QuantizedLinear<T>> {
        QuantizedLinear::new(self.keys.iter().map(KeyMatrix::to_plane).collect(), self.alphas.clone())
    }
}

/// Greedy residual fit of one row in `f64`. Returns `(signs, alphas)` with
/// `signs[i]` holding plane `i`'s `+1` positions.
pub(crate) fn quantize_row(row: &[f64], beta: usize) -> (Vec<Vec<bool>>, Vec<f64>) {
    let mut residual = row.to_vec();
    let n = residual.len() as f64;
    let mut signs = Vec::with_capacity(beta);
    let mut alphas = Vec::with_capacity(beta);
    for _ in 0..beta {
        let positive: Vec<bool> = residual.iter().map(|&r| r >= 0.0).collect();
        let alpha = residual.iter().map(|r| r.abs()).sum::<f64>() / n;
        for (r, &p) in residual.iter_mut().zip(&positive) {
            *r -= if p { alpha } else { -alpha };
        }
        signs.push(positive);
        alphas.push(alpha);
    }
    (signs, alphas)
}

/// Quantizes `w` into `beta` planes, one row at a time.
pub fn quantize_greedy<T: Real>(w: &DenseMatrix<T>, beta: usize) -> Result<QuantizedLinear<T>> {
    if beta == 0 {
        return Err(Error::InvalidBeta);
    }
    if w.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let (m, n) = w.shape();
    let rows: Vec<usize> = (0..m).collect();
    let fits = parallel::map_collect(&rows, |&r| {
        let row: Vec<f64> = w.row(r).iter().map(|v| v.as_f64()).collect();
        quantize_row(&row, beta)
    });

    let planes = (0..beta).map(|i| BinaryPlane::from_fn(m, n, |r, c| fits[r].0[i][c])).collect();
    let alphas = (0..beta).map(|i| fits.iter().map(|(_, a)| T::from_f64(a[i])).collect()).collect();
    QuantizedLinear::new(planes, alphas)
}

/// Reconstructs `Ŵ[r][c] = Σ_i α_i[r] · B_i[r][c]`.
pub fn dequantize<T: Real>(q: &QuantizedLinear<T>) -> DenseMatrix<T> {
    let (m, n) = (q.m(), q.n());
    let mut acc = vec![0.0f64; m * n];
    for (plane, alpha) in q.planes.iter().zip(&q.alphas) {
        for r in 0..m {
            let a = alpha[r].as_f64();
            for c in 0..n {
                acc[r * n + c] += if plane.is_positive(r, c) { a } else { -a };
            }
        }
    }
    DenseMatrix::from_raw(m, n, acc.into_iter().map(T::from_f64).collect())
}

/// `‖W − dequantize(q)‖_F`.
pub fn quantization_error<T: Real>(w: &DenseMatrix<T>, q: &QuantizedLinear<T>) -> Result<f64> {
    if w.shape() != (q.m(), q.n()) {
        return Err(shape_mismatch(format!("{}x{}", q.m(), q.n()), format!("{}x{}", w.rows(), w.cols())));
    }
    w.frobenius_distance(&dequantize(q))
}
