//! Binary embedding-matrix files aligned to a corpus.
//!
//! Layout, all integers little-endian:
//!
//! | bytes   | field                          |
//! |---------|--------------------------------|
//! | 0..4    | magic `LGPS`                   |
//! | 4..8    | `u32` version, always 1        |
//! | 8..12   | `u32` dtype, 1 = binary32      |
//! | 12..20  | `u64` row count N              |
//! | 20..24  | `u32` dimension D              |
//! | 24..32  | `u64` corpus alignment hash    |
//! | 32..    | N·D `f32` values, row-major    |

use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::corpus::Corpus;
use crate::scalar::Scalar;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"LGPS";
pub const VERSION: u32 = 1;
pub const DTYPE_F32: u32 = 1;
pub const HEADER_LEN: usize = 32;

/// Dense row-major N×D matrix with cached double-precision squared norms.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings<T: Scalar> {
    n: usize,
    d: usize,
    data: Vec<T>,
    alignment_hash: u64,
    sq_norms: Vec<f64>,
}

/// Squared norm accumulated in row order; the distance kernel sums dot
/// products in the same order so that ‖x‖² + ‖x‖² − 2·x·x is exactly zero.
#[inline]
pub(crate) fn sq_norm<T: Scalar>(row: &[T]) -> f64 {
    let mut acc = 0.0f64;
    for &v in row {
        let v = v.widen();
        acc += v * v;
    }
    acc
}

impl<T: Scalar> Embeddings<T> {
    pub fn from_vec(n: usize, d: usize, data: Vec<T>, alignment_hash: u64) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::EmptyMatrix);
        }
        if data.len() != n * d {
            return Err(Error::DimensionMismatch {
                left: data.len(),
                right: n * d,
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / d,
                col: pos % d,
            });
        }
        let sq_norms = data.chunks_exact(d).map(sq_norm).collect();
        Ok(Embeddings {
            n,
            d,
            data,
            alignment_hash,
            sq_norms,
        })
    }

    pub fn from_rows(rows: &[Vec<T>], alignment_hash: u64) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                left: d,
                right: bad.len(),
            });
        }
        Self::from_vec(rows.len(), d, rows.concat(), alignment_hash)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn alignment_hash(&self) -> u64 {
        self.alignment_hash
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn sq_norms(&self) -> &[f64] {
        &self.sq_norms
    }

    /// Applies `f` element-wise, recomputing norms.
    pub fn map(&self, mut f: impl FnMut(usize, usize, T) -> T) -> Result<Self> {
        let d = self.d;
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(p, &v)| f(p / d, p % d, v))
            .collect();
        Self::from_vec(self.n, d, data, self.alignment_hash)
    }

    /// Rows reordered so that output row `i` is input row `order[i]`.
    pub fn permute_rows(&self, order: &[usize], alignment_hash: u64) -> Result<Self> {
        let mut data = Vec::with_capacity(order.len() * self.d);
        for &r in order {
            data.extend_from_slice(self.row(r));
        }
        Self::from_vec(order.len(), self.d, data, alignment_hash)
    }
}

/// Writes `data` (row-major, `n`×`d`) in the binary layout.
pub fn write_embeddings(
    data: &[f32],
    n: usize,
    d: usize,
    alignment_hash: u64,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    if n == 0 || d == 0 {
        return Err(Error::EmptyMatrix);
    }
    if data.len() != n * d {
        return Err(Error::DimensionMismatch {
            left: data.len(),
            right: n * d,
        });
    }
    let d32 = u32::try_from(d)
        .map_err(|_| Error::InvalidParameter(format!("dimension {d} exceeds u32")))?;
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut header = [0u8; HEADER_LEN];
    header[0..4].copy_from_slice(MAGIC);
    header[4..8].copy_from_slice(&VERSION.to_le_bytes());
    header[8..12].copy_from_slice(&DTYPE_F32.to_le_bytes());
    header[12..20].copy_from_slice(&(n as u64).to_le_bytes());
    header[20..24].copy_from_slice(&d32.to_le_bytes());
    header[24..32].copy_from_slice(&alignment_hash.to_le_bytes());
    let io = |e| Error::io(path, e);
    w.write_all(&header).map_err(io)?;
    for v in data {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

impl Embeddings<f32> {
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_embeddings(&self.data, self.n, self.d, self.alignment_hash, path)
    }
}

struct Header {
    n: u64,
    d: u32,
    alignment_hash: u64,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < HEADER_LEN {
        if bytes.len() < 4 || &bytes[0..4] != MAGIC {
            return Err(Error::BadMagic);
        }
        return Err(Error::Truncated {
            expected: HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let dtype = u32_at(8);
    if dtype != DTYPE_F32 {
        return Err(Error::UnsupportedDtype(dtype));
    }
    Ok(Header {
        n: u64_at(12),
        d: u32_at(20),
        alignment_hash: u64_at(24),
    })
}

/// Reads and validates an embedding file.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<Embeddings<f32>> {
    let path = path.as_ref();
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header = Vec::with_capacity(HEADER_LEN);
    (&mut file)
        .take(HEADER_LEN as u64)
        .read_to_end(&mut header)
        .map_err(|e| Error::io(path, e))?;
    let h = parse_header(&header)?;
    if h.n == 0 || h.d == 0 {
        return Err(Error::EmptyMatrix);
    }
    let (n, d) = (h.n as usize, h.d as usize);
    let expected = h
        .n
        .checked_mul(u64::from(h.d))
        .and_then(|c| c.checked_mul(4))
        .ok_or(Error::Truncated {
            expected: u64::MAX,
            found: 0,
        })?;
    let found = file.metadata().map_err(|e| Error::io(path, e))?.len() - HEADER_LEN as u64;
    if found < expected {
        return Err(Error::Truncated { expected, found });
    }
    let mut payload = vec![0u8; expected as usize];
    file.read_exact(&mut payload).map_err(|e| Error::io(path, e))?;
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    drop(payload);
    Embeddings::from_vec(n, d, data, h.alignment_hash)
}

/// Checks that `matrix` was produced for exactly this corpus, in this order.
pub fn validate_alignment<T: Scalar>(corpus: &Corpus, matrix: &Embeddings<T>) -> Result<()> {
    if matrix.n() != corpus.len() {
        return Err(Error::RowCountMismatch {
            corpus: corpus.len(),
            matrix: matrix.n(),
        });
    }
    if matrix.alignment_hash() != corpus.alignment_hash() {
        return Err(Error::AlignmentMismatch {
            corpus: corpus.alignment_hash(),
            matrix: matrix.alignment_hash(),
        });
    }
    Ok(())
}
