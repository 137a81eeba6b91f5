//! On-disk format for packed quantized layers, plus memory footprint arithmetic.
//!
//! All integers and floats are little-endian:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "BQGM"
//! 4       2     version (u16, currently 1)
//! 6       4     m (u32)
//! 10      4     n (u32)
//! 14      1     beta (u8)
//! 15      1     mu (u8)
//! 16      ...   beta planes, each:
//!                 m x f32 scaling factors
//!                 m x groups keys, row-major, 1 byte each when mu <= 8, else 2
//! ```
//!
//! `groups = ceil(n / mu)`, so a file is exactly
//! `16 + beta * (4m + m * groups * key_bytes)` bytes.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Real;
use crate::packing::{check_mu, KeyMatrix, MAX_MU};
use crate::quantizer::{PackedLinear, QuantizedLinear};

pub const MAGIC: [u8; 4] = *b"BQGM";
pub const VERSION: u16 = 1;
pub const HEADER_BYTES: usize = 16;

/// Bytes per stored key: the smallest unsigned container holding `mu` bits.
pub fn key_container_bytes(mu: usize) -> usize {
    if mu <= 8 {
        1
    } else {
        2
    }
}

/// Exact encoded size of a model.
pub fn encoded_len(m: usize, n: usize, beta: usize, mu: usize) -> usize {
    HEADER_BYTES + beta * (4 * m + m * n.div_ceil(mu) * key_container_bytes(mu))
}

/// Packs `q` with LUT-unit `mu` and encodes it.
pub fn save<T: Real>(q: &QuantizedLinear<T>, mu: usize) -> Result<Vec<u8>> {
    save_packed(&q.pack(mu)?)
}

/// Encodes an already packed model.
pub fn save_packed<T: Real>(q: &PackedLinear<T>) -> Result<Vec<u8>> {
    let (m, n, beta, mu) = (q.m(), q.n(), q.beta(), q.mu());
    let m32 = u32::try_from(m).map_err(|_| Error::InvalidHeader(format!("m = {m} exceeds u32")))?;
    let n32 = u32::try_from(n).map_err(|_| Error::InvalidHeader(format!("n = {n} exceeds u32")))?;
    let beta8 = u8::try_from(beta).map_err(|_| Error::InvalidHeader(format!("beta = {beta} exceeds u8")))?;

    let mut out = Vec::with_capacity(encoded_len(m, n, beta, mu));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&m32.to_le_bytes());
    out.extend_from_slice(&n32.to_le_bytes());
    out.push(beta8);
    out.push(mu as u8);

    let wide = key_container_bytes(mu) == 2;
    for (keys, alphas) in q.keys().iter().zip(q.alphas()) {
        for a in alphas {
            out.extend_from_slice(&(a.as_f64() as f32).to_le_bytes());
        }
        for &k in keys.as_slice() {
            if wide {
                out.extend_from_slice(&k.to_le_bytes());
            } else {
                out.push(k as u8);
            }
        }
    }
    debug_assert_eq!(out.len(), encoded_len(m, n, beta, mu));
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos + len;
        if end > self.bytes.len() {
            return Err(Error::Truncated { needed: end, got: self.bytes.len() });
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().unwrap())
    }
}

/// Decodes and validates a model. Nothing is returned unless the whole
/// payload is well formed.
pub fn load<T: Real>(bytes: &[u8]) -> Result<PackedLinear<T>> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic: [u8; 4] = cur.array()?;
    if magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let version = u16::from_le_bytes(cur.array()?);
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let m = u32::from_le_bytes(cur.array()?) as usize;
    let n = u32::from_le_bytes(cur.array()?) as usize;
    let [beta] = cur.array::<1>()?;
    let [mu] = cur.array::<1>()?;
    let (beta, mu) = (beta as usize, mu as usize);

    if m == 0 || n == 0 {
        return Err(Error::InvalidHeader(format!("empty shape {m}x{n}")));
    }
    if beta == 0 {
        return Err(Error::InvalidHeader("beta = 0".into()));
    }
    if check_mu(mu).is_err() {
        return Err(Error::InvalidHeader(format!("mu = {mu} outside 1..={MAX_MU}")));
    }
    let needed = encoded_len(m, n, beta, mu);
    if bytes.len() < needed {
        return Err(Error::Truncated { needed, got: bytes.len() });
    }
    if bytes.len() > needed {
        return Err(Error::TrailingBytes(bytes.len() - needed));
    }

    let groups = n.div_ceil(mu);
    let wide = key_container_bytes(mu) == 2;
    let mut all_keys = Vec::with_capacity(beta);
    let mut all_alphas = Vec::with_capacity(beta);
    for plane in 0..beta {
        let mut alphas = Vec::with_capacity(m);
        for row in 0..m {
            let a = f32::from_le_bytes(cur.array()?);
            if !a.is_finite() || a < 0.0 {
                return Err(Error::InvalidAlpha { plane, row, value: a });
            }
            alphas.push(T::from_f64(a as f64));
        }
        let raw = cur.take(m * groups * key_container_bytes(mu))?;
        let keys: Vec<u16> = if wide {
            raw.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect()
        } else {
            raw.iter().map(|&k| k as u16).collect()
        };
        let km = KeyMatrix::from_keys(m, n, mu, keys).map_err(|e| match e {
            Error::KeyOutOfRange { row, group, key, mu, .. } => Error::KeyOutOfRange { plane, row, group, key, mu },
            Error::PadBitsSet { row, .. } => Error::PadBitsSet { plane, row },
            other => other,
        })?;
        all_keys.push(km);
        all_alphas.push(alphas);
    }
    PackedLinear::new(all_keys, all_alphas)
}

pub fn write_model<T: Real>(path: impl AsRef<Path>, q: &PackedLinear<T>) -> Result<()> {
    fs::write(path, save_packed(q)?)?;
    Ok(())
}

pub fn read_model<T: Real>(path: impl AsRef<Path>) -> Result<PackedLinear<T>> {
    load(&fs::read(path)?)
}

/// Bytes needed for an `m x n` weight matrix at `bits` per element, excluding
/// scaling factors.
pub fn footprint(m: usize, n: usize, bits: usize) -> u64 {
    (m as u64 * n as u64 * bits as u64).div_ceil(8)
}

/// Bytes of `f32` scaling factors for `beta` planes of `m` rows.
pub fn alpha_bytes(m: usize, beta: usize) -> u64 {
    4 * m as u64 * beta as u64
}

/// Decimal megabytes.
pub fn megabytes(bytes: u64) -> f64 {
    bytes as f64 / 1e6
}

/// Memory held by one layer invocation, split by buffer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Footprint {
    pub weights: u64,
    pub activations: u64,
    pub outputs: u64,
}

impl Footprint {
    /// Footprint of an `m x n` layer applied to `batch` inputs with the given
    /// element widths in bits.
    pub fn new(m: usize, n: usize, batch: usize, weight_bits: usize, act_bits: usize, out_bits: usize) -> Self {
        Self {
            weights: footprint(m, n, weight_bits),
            activations: footprint(n, batch, act_bits),
            outputs: footprint(m, batch, out_bits),
        }
    }

    pub fn total(&self) -> u64 {
        self.weights + self.activations + self.outputs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packing::BinaryPlane;

    fn sample(mu: usize) -> PackedLinear<f32> {
        let planes = vec![
            BinaryPlane::from_fn(3, 10, |r, c| (r + c) % 2 == 0),
            BinaryPlane::from_fn(3, 10, |r, c| (r * c) % 3 == 1),
        ];
        let alphas = vec![vec![0.5, 1.0, 2.0], vec![0.25, 0.0, 0.125]];
        QuantizedLinear::new(planes, alphas).unwrap().pack(mu).unwrap()
    }

    #[test]
    fn round_trip_and_size() {
        for mu in [1, 3, 8, 9, 16] {
            let q = sample(mu);
            let bytes = save_packed(&q).unwrap();
            assert_eq!(bytes.len(), encoded_len(3, 10, 2, mu));
            assert_eq!(load::<f32>(&bytes).unwrap(), q);
        }
    }

    #[test]
    fn header_layout() {
        let bytes = save_packed(&sample(4)).unwrap();
        assert_eq!(&bytes[..4], b"BQGM");
        assert_eq!(&bytes[4..6], &[1, 0]);
        assert_eq!(&bytes[6..10], &[3, 0, 0, 0]);
        assert_eq!(&bytes[10..14], &[10, 0, 0, 0]);
        assert_eq!((bytes[14], bytes[15]), (2, 4));
        assert_eq!(&bytes[16..20], &0.5f32.to_le_bytes());
    }

    #[test]
    fn rejects_corruption() {
        let bytes = save_packed(&sample(4)).unwrap();

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(load::<f32>(&bad), Err(Error::BadMagic(_))));

        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(load::<f32>(&bad), Err(Error::UnsupportedVersion(2))));

        assert!(matches!(load::<f32>(&bytes[..bytes.len() - 1]), Err(Error::Truncated { .. })));
        assert!(matches!(load::<f32>(&bytes[..10]), Err(Error::Truncated { .. })));

        let mut bad = bytes.clone();
        bad.push(0);
        assert!(matches!(load::<f32>(&bad), Err(Error::TrailingBytes(1))));

        let mut bad = bytes.clone();
        bad[15] = 17;
        assert!(matches!(load::<f32>(&bad), Err(Error::InvalidHeader(_))));

        // first key of plane 0 lives after the 3 alphas
        let mut bad = bytes.clone();
        bad[16 + 12] = 0x10;
        assert!(matches!(load::<f32>(&bad), Err(Error::KeyOutOfRange { plane: 0, row: 0, group: 0, .. })));

        // n = 10, mu = 4: last key of each row has 2 live bits
        let mut bad = bytes.clone();
        bad[16 + 12 + 2] = 0b0100;
        assert!(matches!(load::<f32>(&bad), Err(Error::PadBitsSet { plane: 0, row: 0 })));

        let mut bad = bytes.clone();
        bad[16..20].copy_from_slice(&(-1.0f32).to_le_bytes());
        assert!(matches!(load::<f32>(&bad), Err(Error::InvalidAlpha { plane: 0, row: 0, .. })));
    }

    #[test]
    fn table_two_weight_column() {
        assert_eq!(footprint(512, 512, 4), 131_072);
        assert_eq!(footprint(512, 512, 2), 65_536);
        assert_eq!(footprint(512, 512, 32), 1_048_576);
        let f = Footprint::new(512, 512, 18, 32, 32, 32);
        assert_eq!(format!("{:.3}", megabytes(f.activations)), "0.037");
        assert_eq!(format!("{:.3}", megabytes(f.total())), "1.122");
    }

    #[test]
    fn file_round_trip() {
        let dir = std::env::temp_dir().join(format!("bqgm-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("layer.bqgm");
        let q = sample(8);
        write_model(&path, &q).unwrap();
        assert_eq!(read_model::<f32>(&path).unwrap(), q);
        std::fs::remove_dir_all(dir).unwrap();
    }
}
