//! Lookup tables `q = M_mu · x` over every length-`mu` sub-vector of the input.
//!
//! Entry `k` of a table holds the dot product of key `k`'s sign vector with
//! the sub-vector, so a row of sign bits can be multiplied by looking up its
//! key. Tables are built either naively (one dot product per key) or with the
//! dynamic-programming recurrence, which needs `2^mu + mu - 1` scalar
//! operations per table instead of `2^mu · mu`.

use std::ops::Range;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, Real};
use crate::packing::{check_mu, BinaryPlane};
use crate::parallel;

/// Table construction strategy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LutBuilder {
    /// Dynamic programming: one add per first-half entry, negation for the rest.
    #[default]
    Dp,
    /// Direct `M_mu · x` product.
    Naive,
}

/// Placement of the `b` tables that share a group.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LutLayout {
    /// Each table's `2^mu` entries are contiguous.
    TableMajor,
    /// Entries for the same key are contiguous across the group's tables.
    KeyMajor,
}

impl LutLayout {
    /// Key-major once there are several tables per group.
    pub fn default_for(batch: usize) -> Self {
        if batch > 1 {
            LutLayout::KeyMajor
        } else {
            LutLayout::TableMajor
        }
    }

    /// Offset of `(col, key)` within one group's block of `batch` tables.
    #[inline(always)]
    pub fn offset(self, mu: usize, batch: usize, col: usize, key: usize) -> usize {
        match self {
            LutLayout::TableMajor => (col << mu) + key,
            LutLayout::KeyMajor => key * batch + col,
        }
    }

    #[inline(always)]
    fn start_and_stride(self, mu: usize, batch: usize, col: usize) -> (usize, usize) {
        match self {
            LutLayout::TableMajor => (col << mu, 1),
            LutLayout::KeyMajor => (col, batch),
        }
    }
}

/// The `2^mu x mu` matrix whose row `k` is the sign vector of key `k`.
pub fn make_m_mu(mu: usize) -> Result<BinaryPlane> {
    check_mu(mu)?;
    Ok(BinaryPlane::from_fn(1 << mu, mu, |k, t| (k >> t) & 1 == 1))
}

/// Counted operations for one DP-built table.
#[inline]
pub const fn dp_ops(mu: usize) -> u64 {
    (1u64 << mu) + mu as u64 - 1
}

/// Counted operations for one naively built table.
#[inline]
pub const fn naive_ops(mu: usize) -> u64 {
    (1u64 << mu) * mu as u64
}

/// DP fill of one table into `out[k * stride]`; returns the operation count.
///
/// Key 0 (all `-1`) is `-Σx`. Setting bit `i - 1` of a key below `2^(i-1)`
/// adds `2·x[i-1]`, which fills keys `1 .. 2^(mu-1)`. The upper half is the
/// bitwise complement of the lower half and is filled by negation.
#[inline]
pub(crate) fn fill_dp<T: Real>(x: &[T], out: &mut [T], stride: usize) -> u64 {
    let mu = x.len();
    let mut ops = 0u64;

    let mut r0 = -x[0];
    ops += 1;
    for &xi in &x[1..] {
        r0 = r0 - xi;
        ops += 1;
    }
    out[0] = r0;

    let half = 1usize << (mu - 1);
    let mut k = 1usize;
    for i in 1..mu {
        let twice = x[i - 1] + x[i - 1];
        for j in 0..(1usize << (i - 1)) {
            out[k * stride] = out[j * stride] + twice;
            k += 1;
            ops += 1;
        }
    }
    debug_assert_eq!(k, half);

    let full = (1usize << mu) - 1;
    for j in 0..half {
        out[(full - j) * stride] = -out[j * stride];
        ops += 1;
    }
    ops
}

/// Naive fill: entry `k` is the signed sum `Σ_t s(k, t) · x[t]`, accumulated
/// in ascending `t`.
#[inline]
pub(crate) fn fill_naive<T: Real>(x: &[T], out: &mut [T], stride: usize) -> u64 {
    let mu = x.len();
    for k in 0..(1usize << mu) {
        let mut acc = if k & 1 == 1 { x[0] } else { -x[0] };
        for (t, &xt) in x.iter().enumerate().skip(1) {
            acc = if (k >> t) & 1 == 1 { acc + xt } else { acc - xt };
        }
        out[k * stride] = acc;
    }
    naive_ops(mu)
}

#[inline]
pub(crate) fn fill<T: Real>(builder: LutBuilder, x: &[T], out: &mut [T], stride: usize) -> u64 {
    match builder {
        LutBuilder::Dp => fill_dp(x, out, stride),
        LutBuilder::Naive => fill_naive(x, out, stride),
    }
}

fn check_subvector<T>(x: &[T]) -> Result<()> {
    check_mu(x.len())
}

/// `M_mu · x` by direct dot products.
pub fn build_lut_naive<T: Real>(x: &[T]) -> Result<Vec<T>> {
    check_subvector(x)?;
    let mut out = vec![T::zero(); 1 << x.len()];
    fill_naive(x, &mut out, 1);
    Ok(out)
}

/// `M_mu · x` by dynamic programming.
pub fn build_lut_dp<T: Real>(x: &[T]) -> Result<Vec<T>> {
    check_subvector(x)?;
    let mut out = vec![T::zero(); 1 << x.len()];
    fill_dp(x, &mut out, 1);
    Ok(out)
}

/// Gathers the zero-padded sub-vectors of `x` (`n x b`) for `groups`,
/// laid out as `[group][col][t]`.
pub fn stage_subvectors<T: Real>(x: &DenseMatrix<T>, groups: Range<usize>, mu: usize, out: &mut Vec<T>) {
    let (n, b) = x.shape();
    out.clear();
    out.resize(groups.len() * b * mu, T::zero());
    let data = x.as_slice();
    for (gl, g) in groups.enumerate() {
        let base = gl * b * mu;
        let first = g * mu;
        let live = mu.min(n.saturating_sub(first));
        for t in 0..live {
            let src = &data[(first + t) * b..(first + t + 1) * b];
            for (col, &v) in src.iter().enumerate() {
                out[base + col * mu + t] = v;
            }
        }
    }
}

/// Tables for a contiguous range of groups and every batch column.
#[derive(Clone, Debug, PartialEq)]
pub struct LutBlock<T> {
    mu: usize,
    groups: usize,
    batch: usize,
    layout: LutLayout,
    entries: Vec<T>,
}

impl<T: Real> LutBlock<T> {
    pub(crate) fn with_capacity(mu: usize, max_groups: usize, batch: usize, layout: LutLayout) -> Self {
        Self { mu, groups: 0, batch, layout, entries: Vec::with_capacity((max_groups * batch) << mu) }
    }

    #[inline]
    pub fn mu(&self) -> usize {
        self.mu
    }

    #[inline]
    pub fn groups(&self) -> usize {
        self.groups
    }

    #[inline]
    pub fn batch(&self) -> usize {
        self.batch
    }

    #[inline]
    pub fn layout(&self) -> LutLayout {
        self.layout
    }

    /// Number of tables, one per `(group, col)` pair.
    #[inline]
    pub fn tables(&self) -> usize {
        self.groups * self.batch
    }

    #[inline]
    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    /// Entries of one group: `batch` tables of `2^mu` values each.
    #[inline(always)]
    pub(crate) fn group_block(&self, group: usize) -> &[T] {
        let size = self.batch << self.mu;
        &self.entries[group * size..(group + 1) * size]
    }

    /// Position of `(group, col, key)` in [`entries`](Self::entries).
    #[inline]
    pub fn index(&self, group: usize, col: usize, key: usize) -> usize {
        ((group * self.batch) << self.mu) + self.layout.offset(self.mu, self.batch, col, key)
    }

    /// Entry `key` of table `table = group · batch + col`.
    #[inline]
    pub fn get(&self, table: usize, key: usize) -> T {
        self.entries[self.index(table / self.batch, table % self.batch, key)]
    }

    /// The same tables re-laid out.
    pub fn to_layout(&self, layout: LutLayout) -> Self {
        let mut entries = vec![T::zero(); self.entries.len()];
        for g in 0..self.groups {
            for col in 0..self.batch {
                for key in 0..(1usize << self.mu) {
                    let dst = ((g * self.batch) << self.mu) + layout.offset(self.mu, self.batch, col, key);
                    entries[dst] = self.entries[self.index(g, col, key)];
                }
            }
        }
        Self { layout, entries, ..*self }
    }

    /// Rebuilds the block from sub-vectors staged by [`stage_subvectors`].
    /// Each group is built by a single worker. Returns the operation count.
    pub(crate) fn rebuild(&mut self, staged: &[T], groups: usize, builder: LutBuilder, parallel: bool) -> u64 {
        let (mu, batch, layout) = (self.mu, self.batch, self.layout);
        let size = batch << mu;
        self.groups = groups;
        self.entries.resize(groups * size, T::zero());
        let ops = AtomicU64::new(0);
        parallel::for_each_chunk_mut(&mut self.entries, size, parallel && groups > 1, |g, block| {
            let mut local = 0;
            for col in 0..batch {
                let x = &staged[(g * batch + col) * mu..(g * batch + col + 1) * mu];
                let (start, stride) = layout.start_and_stride(mu, batch, col);
                local += fill(builder, x, &mut block[start..], stride);
            }
            ops.fetch_add(local, Ordering::Relaxed);
        });
        ops.into_inner()
    }
}

/// Builds the tables for `groups` of `x` (`n x b`, zero-padded past `n`).
pub fn build_lut_block<T: Real>(
    x: &DenseMatrix<T>,
    groups: Range<usize>,
    mu: usize,
    layout: LutLayout,
    builder: LutBuilder,
) -> Result<LutBlock<T>> {
    check_mu(mu)?;
    if groups.is_empty() || x.cols() == 0 {
        return Err(Error::EmptyMatrix);
    }
    let mut staged = Vec::new();
    stage_subvectors(x, groups.clone(), mu, &mut staged);
    let mut block = LutBlock::with_capacity(mu, groups.len(), x.cols(), layout);
    block.rebuild(&staged, groups.len(), builder, false);
    Ok(block)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oracle(x: &[f64], key: usize) -> f64 {
        x.iter().enumerate().map(|(t, &v)| if (key >> t) & 1 == 1 { v } else { -v }).sum()
    }

    #[test]
    fn m_mu_small_cases() {
        let m1 = make_m_mu(1).unwrap();
        assert_eq!((m1.get(0, 0), m1.get(1, 0)), (-1, 1));

        let m2 = make_m_mu(2).unwrap();
        let rows: Vec<(i8, i8)> = (0..4).map(|k| (m2.get(k, 0), m2.get(k, 1))).collect();
        assert_eq!(rows, vec![(-1, -1), (1, -1), (-1, 1), (1, 1)]);

        let m4 = make_m_mu(4).unwrap();
        assert_eq!((0..4).map(|t| m4.get(6, t)).collect::<Vec<_>>(), vec![-1, 1, 1, -1]);

        assert!(make_m_mu(17).is_err());
    }

    #[test]
    fn mu_two_table() {
        let x = [1.0, 2.0];
        assert_eq!(build_lut_naive(&x).unwrap(), vec![-3.0, -1.0, 1.0, 3.0]);
        assert_eq!(build_lut_dp(&x).unwrap(), vec![-3.0, -1.0, 1.0, 3.0]);
        let mut out = [0.0; 4];
        assert_eq!(fill_dp(&x, &mut out, 1), 5);
        assert_eq!(fill_naive(&x, &mut out, 1), 8);
    }

    #[test]
    fn zero_and_ones_vectors() {
        assert!(build_lut_dp(&[0.0f32; 5]).unwrap().iter().all(|&v| v == 0.0));
        let t = build_lut_dp(&[1.0f64; 4]).unwrap();
        assert_eq!((t[15], t[0]), (4.0, -4.0));
        let t = build_lut_naive(&[1.0f64; 4]).unwrap();
        assert_eq!((t[15], t[0]), (4.0, -4.0));
    }

    #[test]
    fn complement_entries_are_negations() {
        let t = build_lut_dp(&[0.25f64, -1.5, 3.0, 0.125]).unwrap();
        assert_eq!(t[9].to_bits(), (-t[6]).to_bits());
        for k in 0..16 {
            assert_eq!(t[15 - k].to_bits(), (-t[k]).to_bits());
        }
    }

    #[test]
    fn dp_matches_oracle_for_every_mu() {
        for mu in 1..=10usize {
            let x: Vec<f64> = (0..mu).map(|t| ((t * 37 + 11) % 17) as f64 / 7.0 - 1.0).collect();
            let dp = build_lut_dp(&x).unwrap();
            let mut ops = 0;
            let mut buf = vec![0.0; 1 << mu];
            ops += fill_dp(&x, &mut buf, 1);
            assert_eq!(ops, dp_ops(mu));
            for (k, v) in dp.iter().enumerate() {
                assert!((v - oracle(&x, k)).abs() <= 1e-12, "mu={mu} k={k}");
            }
        }
    }

    #[test]
    fn rejects_bad_lengths() {
        assert!(matches!(build_lut_dp::<f64>(&[]), Err(Error::MuOutOfRange(0))));
        assert!(matches!(build_lut_naive(&[0.0f32; 17]), Err(Error::MuOutOfRange(17))));
    }

    #[test]
    fn key_major_addressing_with_four_tables() {
        let x = DenseMatrix::from_fn(4, 4, |r, c| (r * 4 + c) as f64);
        let block = build_lut_block(&x, 0..1, 4, LutLayout::KeyMajor, LutBuilder::Dp).unwrap();
        for t in 0..4 {
            for k in 0..16 {
                assert_eq!(block.index(0, t, k), k * 4 + t);
            }
        }
    }

    #[test]
    fn single_table_layouts_coincide() {
        let x = DenseMatrix::from_fn(3, 1, |r, _| r as f64 - 0.5);
        let a = build_lut_block(&x, 0..1, 3, LutLayout::TableMajor, LutBuilder::Dp).unwrap();
        let b = build_lut_block(&x, 0..1, 3, LutLayout::KeyMajor, LutBuilder::Dp).unwrap();
        assert_eq!(a.tables(), 1);
        assert_eq!(a.entries(), b.entries());
    }

    #[test]
    fn block_tables_match_naive_with_padding() {
        // n = 5, mu = 2 -> 3 groups, last sub-vector zero-padded.
        let x = DenseMatrix::from_fn(5, 2, |r, c| (r as f64 + 1.0) * if c == 0 { 1.0 } else { -0.5 });
        for layout in [LutLayout::TableMajor, LutLayout::KeyMajor] {
            let block = build_lut_block(&x, 0..3, 2, layout, LutBuilder::Dp).unwrap();
            assert_eq!(block.tables(), 6);
            for g in 0..3 {
                for col in 0..2 {
                    let sub: Vec<f64> =
                        (0..2).map(|t| if g * 2 + t < 5 { x.get(g * 2 + t, col) } else { 0.0 }).collect();
                    let naive = build_lut_naive(&sub).unwrap();
                    for (k, v) in naive.iter().enumerate() {
                        assert_eq!(block.get(g * 2 + col, k), *v);
                    }
                }
            }
            let other = match layout {
                LutLayout::TableMajor => LutLayout::KeyMajor,
                LutLayout::KeyMajor => LutLayout::TableMajor,
            };
            let converted = block.to_layout(other);
            for t in 0..6 {
                for k in 0..4 {
                    assert_eq!(converted.get(t, k), block.get(t, k));
                }
            }
            let mut a: Vec<u64> = block.entries().iter().map(|v| v.to_bits()).collect();
            let mut b: Vec<u64> = converted.entries().iter().map(|v| v.to_bits()).collect();
            a.sort_unstable();
            b.sort_unstable();
            assert_eq!(a, b);
            assert_eq!(converted.to_layout(layout), block);
        }
    }
}
