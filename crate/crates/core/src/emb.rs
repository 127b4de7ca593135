//! `EMB1` embedding shards: fixed-stride half-precision vectors keyed by PMID.
//!
//! ```text
//! magic   "EMB1"
//! u32     format version (1)
//! u32     dimension D
//! u64     entry count
//! entry*  u64 pmid, D x f16
//! ```
//!
//! All integers and floats are little-endian.

use std::io::{self, Read, Write};

use half::f16;
use thiserror::Error;

pub const EMB_MAGIC: [u8; 4] = *b"EMB1";
pub const EMB_VERSION: u32 = 1;
const HEADER_LEN: u64 = 4 + 4 + 4 + 8;

#[derive(Debug, Error)]
pub enum EmbError {
    #[error("not an EMB1 shard (magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("unsupported EMB1 version {0}")]
    UnsupportedVersion(u32),
    #[error("shard truncated in entry {entry} at byte {offset}")]
    Truncated { entry: u64, offset: u64 },
    #[error("vector for pmid {pmid} has {actual} values, shard dimension is {declared}")]
    DimensionMismatch {
        pmid: u64,
        declared: usize,
        actual: usize,
    },
    #[error("vector for pmid {pmid} has a non-finite value at half precision")]
    NonFinite { pmid: u64 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Rounds to half precision, refusing values that overflow to infinity or are NaN.
pub fn quantize(values: &[f32]) -> Option<Vec<f16>> {
    let out: Vec<f16> = values.iter().map(|&v| f16::from_f32(v)).collect();
    out.iter().all(|h| h.is_finite()).then_some(out)
}

/// Widens half-precision values for computation.
pub fn widen(values: &[f16]) -> Vec<f32> {
    values.iter().map(|h| h.to_f32()).collect()
}

/// Writes a complete shard and returns the number of bytes written.
pub fn write_emb<'a, W, I>(mut sink: W, dim: usize, entries: I) -> Result<u64, EmbError>
where
    W: Write,
    I: ExactSizeIterator<Item = (u64, &'a [f16])>,
{
    sink.write_all(&EMB_MAGIC)?;
    sink.write_all(&EMB_VERSION.to_le_bytes())?;
    sink.write_all(&(dim as u32).to_le_bytes())?;
    sink.write_all(&(entries.len() as u64).to_le_bytes())?;
    let mut written = HEADER_LEN;
    let mut row = Vec::with_capacity(8 + 2 * dim);
    for (pmid, vector) in entries {
        if vector.len() != dim {
            return Err(EmbError::DimensionMismatch {
                pmid,
                declared: dim,
                actual: vector.len(),
            });
        }
        if !vector.iter().all(|h| h.is_finite()) {
            return Err(EmbError::NonFinite { pmid });
        }
        row.clear();
        row.extend_from_slice(&pmid.to_le_bytes());
        for h in vector {
            row.extend_from_slice(&h.to_le_bytes());
        }
        sink.write_all(&row)?;
        written += row.len() as u64;
    }
    sink.flush()?;
    Ok(written)
}

/// Decoded shard contents in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbShard {
    pub dim: usize,
    pub entries: Vec<(u64, Vec<f16>)>,
}

fn read_exact_or_truncated<R: Read>(
    source: &mut R,
    buf: &mut [u8],
    entry: u64,
    offset: u64,
) -> Result<(), EmbError> {
    source.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => EmbError::Truncated { entry, offset },
        _ => EmbError::Io(e),
    })
}

pub fn read_emb<R: Read>(mut source: R) -> Result<EmbShard, EmbError> {
    let mut header = [0u8; HEADER_LEN as usize];
    read_exact_or_truncated(&mut source, &mut header, 0, 0)?;
    let magic: [u8; 4] = header[0..4].try_into().unwrap();
    if magic != EMB_MAGIC {
        return Err(EmbError::BadMagic(magic));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != EMB_VERSION {
        return Err(EmbError::UnsupportedVersion(version));
    }
    let dim = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(header[12..20].try_into().unwrap());

    let stride = 8 + 2 * dim;
    let mut row = vec![0u8; stride];
    let mut entries = Vec::with_capacity(count.min(1 << 20) as usize);
    for entry in 0..count {
        let offset = HEADER_LEN + entry * stride as u64;
        read_exact_or_truncated(&mut source, &mut row, entry, offset)?;
        let pmid = u64::from_le_bytes(row[0..8].try_into().unwrap());
        let vector: Vec<f16> = row[8..]
            .chunks_exact(2)
            .map(|b| f16::from_le_bytes([b[0], b[1]]))
            .collect();
        if !vector.iter().all(|h| h.is_finite()) {
            return Err(EmbError::NonFinite { pmid });
        }
        entries.push((pmid, vector));
    }
    Ok(EmbShard { dim, entries })
}
