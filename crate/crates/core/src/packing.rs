//! Bit-level storage of sign matrices.
//!
//! Two encodings share one convention: bit `t` of a container is position `t`
//! of the covered sub-vector (LSB first), and a set bit means `+1` while a
//! clear bit means `-1`. Under this convention the sign vector
//! `(-1, +1, +1, -1)` packs to key `6`.
//!
//! * [`BinaryPlane`] keeps each row in whole 32-bit words; the row's final
//!   word has its unused high bits cleared.
//! * [`KeyMatrix`] regroups every row into `mu`-bit keys, the indices used for
//!   table lookups.

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, Real};

/// Largest supported LUT-unit; tables hold `2^mu` entries.
pub const MAX_MU: usize = 16;

/// LUT-unit used throughout the benchmarks.
pub const DEFAULT_MU: usize = 8;

pub(crate) fn check_mu(mu: usize) -> Result<()> {
    if (1..=MAX_MU).contains(&mu) {
        Ok(())
    } else {
        Err(Error::MuOutOfRange(mu))
    }
}

#[inline]
fn words_for(cols: usize) -> usize {
    cols.div_ceil(32)
}

/// An `rows x cols` matrix over `{-1, +1}`, one bit per entry.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BinaryPlane {
    rows: usize,
    cols: usize,
    words_per_row: usize,
    words: Vec<u32>,
}

impl BinaryPlane {
    /// A plane with every entry `-1`.
    pub fn negative(rows: usize, cols: usize) -> Self {
        let words_per_row = words_for(cols);
        Self { rows, cols, words_per_row, words: vec![0; rows * words_per_row] }
    }

    /// Builds a plane from a predicate returning `true` for `+1`.
    pub fn from_fn(rows: usize, cols: usize, mut positive: impl FnMut(usize, usize) -> bool) -> Self {
        let mut plane = Self::negative(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                if positive(r, c) {
                    plane.set_positive(r, c);
                }
            }
        }
        plane
    }

    /// Builds a plane from row-major signs; every value must be `-1` or `+1`.
    pub fn from_signs(rows: usize, cols: usize, signs: &[i8]) -> Result<Self> {
        if signs.len() != rows * cols {
            return Err(Error::DataLength { rows, cols, len: signs.len() });
        }
        if let Some(i) = signs.iter().position(|&s| s != 1 && s != -1) {
            return Err(crate::error::shape_mismatch("signs in {-1, +1}", format!("{} at index {i}", signs[i])));
        }
        Ok(Self::from_fn(rows, cols, |r, c| signs[r * cols + c] > 0))
    }

    /// Rebuilds a plane from the row-aligned word stream of [`pack_plane_words`].
    /// Bits beyond `cols` in each row's last word are ignored.
    pub fn from_words(rows: usize, cols: usize, words: &[u32]) -> Result<Self> {
        let words_per_row = words_for(cols);
        if words.len() != rows * words_per_row {
            return Err(Error::LengthMismatch { expected: rows * words_per_row, got: words.len() });
        }
        let mut words = words.to_vec();
        let tail = cols % 32;
        if tail != 0 {
            let mask = (1u32 << tail) - 1;
            for r in 0..rows {
                words[r * words_per_row + words_per_row - 1] &= mask;
            }
        }
        Ok(Self { rows, cols, words_per_row, words })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn words_per_row(&self) -> usize {
        self.words_per_row
    }

    #[inline]
    pub fn row_words(&self, row: usize) -> &[u32] {
        &self.words[row * self.words_per_row..(row + 1) * self.words_per_row]
    }

    #[inline]
    pub fn is_positive(&self, row: usize, col: usize) -> bool {
        let w = self.words[row * self.words_per_row + col / 32];
        (w >> (col % 32)) & 1 == 1
    }

    /// The entry at `(row, col)` as `-1` or `+1`.
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> i8 {
        if self.is_positive(row, col) {
            1
        } else {
            -1
        }
    }

    #[inline]
    pub fn set_positive(&mut self, row: usize, col: usize) {
        self.words[row * self.words_per_row + col / 32] |= 1 << (col % 32);
    }

    /// Flips every sign.
    pub fn complement(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |r, c| !self.is_positive(r, c))
    }

    /// Materializes the plane as a dense `±1` matrix.
    pub fn to_dense<T: Real>(&self) -> DenseMatrix<T> {
        DenseMatrix::from_fn(self.rows, self.cols, |r, c| if self.is_positive(r, c) { T::one() } else { -T::one() })
    }

    /// Extracts `len <= 32` bits of `row` starting at column `start`;
    /// columns past the end read as 0.
    #[inline]
    fn extract(&self, row: usize, start: usize, len: usize) -> u32 {
        let words = self.row_words(row);
        let wi = start / 32;
        let shift = start % 32;
        let lo = words.get(wi).copied().unwrap_or(0) as u64;
        let hi = words.get(wi + 1).copied().unwrap_or(0) as u64;
        let bits = ((hi << 32) | lo) >> shift;
        let mask = if len == 32 { u32::MAX as u64 } else { (1u64 << len) - 1 };
        (bits & mask) as u32
    }
}

/// A binary plane regrouped into `mu`-bit integer keys, `groups` per row.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct KeyMatrix {
    m: usize,
    n: usize,
    mu: usize,
    groups: usize,
    keys: Vec<u16>,
}

impl KeyMatrix {
    /// Builds a key matrix from raw row-major keys, validating the key range
    /// and that padded bit positions are clear.
    pub fn from_keys(m: usize, n: usize, mu: usize, keys: Vec<u16>) -> Result<Self> {
        check_mu(mu)?;
        let groups = n.div_ceil(mu);
        if keys.len() != m * groups {
            return Err(Error::LengthMismatch { expected: m * groups, got: keys.len() });
        }
        let pad = groups * mu - n;
        let live_last = mu - pad;
        for (i, &k) in keys.iter().enumerate() {
            let (row, group) = (i / groups.max(1), i % groups.max(1));
            if (k as u32) >> mu != 0 {
                return Err(Error::KeyOutOfRange { plane: 0, row, group, key: k as u32, mu });
            }
            if group == groups - 1 && pad > 0 && (k as u32) >> live_last != 0 {
                return Err(Error::PadBitsSet { plane: 0, row });
            }
        }
        Ok(Self { m, n, mu, groups, keys })
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of live columns of the source plane.
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn mu(&self) -> usize {
        self.mu
    }

    #[inline]
    pub fn groups(&self) -> usize {
        self.groups
    }

    /// Padded positions in the final group.
    #[inline]
    pub fn pad(&self) -> usize {
        self.groups * self.mu - self.n
    }

    #[inline]
    pub fn key(&self, row: usize, group: usize) -> u16 {
        self.keys[row * self.groups + group]
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[u16] {
        &self.keys[row * self.groups..(row + 1) * self.groups]
    }

    #[inline]
    pub fn as_slice(&self) -> &[u16] {
        &self.keys
    }

    /// Decodes the keys back into a plane of `n` columns.
    pub fn to_plane(&self) -> BinaryPlane {
        BinaryPlane::from_fn(self.m, self.n, |r, c| (self.key(r, c / self.mu) >> (c % self.mu)) & 1 == 1)
    }
}

/// Encodes a sign vector (length <= 32) as an integer key.
pub fn encode_signs(signs: &[i8]) -> u32 {
    assert!(signs.len() <= 32, "at most 32 signs fit a key");
    signs.iter().enumerate().filter(|(_, &s)| s > 0).fold(0u32, |k, (t, _)| k | (1 << t))
}

/// Decodes a `mu`-bit key into its sign vector.
pub fn decode_key(key: u32, mu: usize) -> Vec<i8> {
    (0..mu).map(|t| if (key >> t) & 1 == 1 { 1 } else { -1 }).collect()
}

/// Packs each row of `plane` into `ceil(cols / mu)` keys. Positions beyond the
/// last column contribute clear bits.
pub fn pack_keys(plane: &BinaryPlane, mu: usize) -> Result<KeyMatrix> {
    check_mu(mu)?;
    let (m, n) = (plane.rows(), plane.cols());
    let groups = n.div_ceil(mu);
    let mut keys = Vec::with_capacity(m * groups);
    for r in 0..m {
        for g in 0..groups {
            let start = g * mu;
            let live = mu.min(n - start);
            keys.push(plane.extract(r, start, live) as u16);
        }
    }
    Ok(KeyMatrix { m, n, mu, groups, keys })
}

/// Expands a packed word into 32 signs: `w_i = ((x >> i) & 1) * 2 - 1`.
#[inline]
pub fn unpack_word(x: u32) -> [i8; 32] {
    let mut w = [0i8; 32];
    for (i, out) in w.iter_mut().enumerate() {
        *out = ((((x >> i) & 1) * 2) as i8) - 1;
    }
    w
}

/// Same shift/mask/affine expansion as [`unpack_word`], writing `out.len() <= 32`
/// lanes directly in the element type.
#[inline]
pub fn unpack_word_into<T: Real>(x: u32, out: &mut [T]) {
    let two = T::one() + T::one();
    for (i, o) in out.iter_mut().enumerate() {
        *o = T::from_f64(((x >> i) & 1) as f64) * two - T::one();
    }
}

/// Serializes a plane as a row-major stream of 32-bit words. Every row starts
/// on a fresh word; unused bits of a row's last word are 0.
pub fn pack_plane_words(plane: &BinaryPlane) -> Vec<u32> {
    plane.words.clone()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row_plane(signs: &[i8]) -> BinaryPlane {
        BinaryPlane::from_signs(1, signs.len(), signs).unwrap()
    }

    #[test]
    fn key_six_example() {
        let k = pack_keys(&row_plane(&[-1, 1, 1, -1]), 4).unwrap();
        assert_eq!(k.as_slice(), &[6]);
    }

    #[test]
    fn all_positive_row_packs_to_fifteen() {
        let k = pack_keys(&row_plane(&[1, 1, 1, 1]), 4).unwrap();
        assert_eq!(k.as_slice(), &[15]);
    }

    #[test]
    fn partial_final_group() {
        // positions 4,5 live in the second group: (+1, -1) -> bit0 set only.
        let k = pack_keys(&row_plane(&[1, -1, 1, -1, 1, -1]), 4).unwrap();
        assert_eq!(k.groups(), 2);
        assert_eq!(k.pad(), 2);
        assert_eq!(k.as_slice(), &[0b0101, 0b01]);
        let k = pack_keys(&row_plane(&[1, 1, 1, 1, 1, 1]), 4).unwrap();
        assert_eq!(k.as_slice(), &[15, 3]);
    }

    #[test]
    fn mu_range_is_checked() {
        let p = row_plane(&[1, 1]);
        assert!(matches!(pack_keys(&p, 0), Err(Error::MuOutOfRange(0))));
        assert!(matches!(pack_keys(&p, 17), Err(Error::MuOutOfRange(17))));
        assert!(pack_keys(&p, 16).is_ok());
    }

    #[test]
    fn keys_span_word_boundaries() {
        let plane = BinaryPlane::from_fn(2, 70, |r, c| (c * 7 + r) % 3 == 0);
        for mu in [3, 5, 7, 8, 13, 16] {
            let k = pack_keys(&plane, mu).unwrap();
            assert_eq!(k.to_plane(), plane, "mu={mu}");
        }
    }

    #[test]
    fn unpack_word_cases() {
        assert_eq!(unpack_word(0), [-1; 32]);
        assert_eq!(unpack_word(u32::MAX), [1; 32]);
        let one = unpack_word(1);
        assert_eq!(one[0], 1);
        assert!(one[1..].iter().all(|&w| w == -1));
    }

    #[test]
    fn plane_words_boundaries() {
        let ones = BinaryPlane::from_fn(1, 32, |_, _| true);
        assert_eq!(pack_plane_words(&ones), vec![u32::MAX]);

        let p33 = BinaryPlane::from_fn(1, 33, |_, _| true);
        let words = pack_plane_words(&p33);
        assert_eq!(words, vec![u32::MAX, 1]);
        assert_eq!(words[1].count_ones(), 1);
    }

    #[test]
    fn from_words_checks_length_and_masks_tail() {
        assert!(matches!(BinaryPlane::from_words(2, 33, &[0; 3]), Err(Error::LengthMismatch { .. })));
        let p = BinaryPlane::from_words(1, 33, &[0, u32::MAX]).unwrap();
        assert_eq!(pack_plane_words(&p), vec![0, 1]);
    }

    #[test]
    fn from_keys_validation() {
        assert!(matches!(KeyMatrix::from_keys(1, 4, 4, vec![16]), Err(Error::KeyOutOfRange { .. })));
        // n=6, mu=4: last key has two live bits.
        assert!(matches!(KeyMatrix::from_keys(1, 6, 4, vec![0, 4]), Err(Error::PadBitsSet { .. })));
        assert!(KeyMatrix::from_keys(1, 6, 4, vec![15, 3]).is_ok());
    }

    #[test]
    fn codec_is_a_bijection_for_small_mu() {
        for mu in 1..=8usize {
            let mut seen = vec![false; 1 << mu];
            for k in 0..(1u32 << mu) {
                let signs = decode_key(k, mu);
                let packed = pack_keys(&row_plane(&signs), mu).unwrap().as_slice()[0] as u32;
                assert_eq!(packed, k);
                assert_eq!(encode_signs(&signs), k);
                assert!(!seen[k as usize]);
                seen[k as usize] = true;
            }
        }
    }

    #[test]
    fn complement_law() {
        let plane = BinaryPlane::from_fn(3, 16, |r, c| (r + c * c) % 5 < 2);
        let flipped = plane.complement();
        for mu in [1, 2, 4, 8, 16] {
            let a = pack_keys(&plane, mu).unwrap();
            let b = pack_keys(&flipped, mu).unwrap();
            let full = (1u32 << mu) - 1;
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                assert_eq!(*y as u32, full - *x as u32);
            }
        }
    }
}
