//! `TACS` token-activation container.
//!
//! ```text
//! magic "TACS", u32 version = 1, u64 document count
//! per document:
//!   u64 pmid, u32 block length, then the block:
//!     u32 D, u32 T, u32 flags (bit 0: losses present)
//!     T x (u16 byte length + UTF-8 token)
//!     T bytes special mask (0 or 1)
//!     T x D f32 activations, row-major
//!     T x f32 losses            (only when bit 0 is set)
//! ```
//!
//! Everything is little-endian. D may differ between documents.

use std::io::{self, Read, Write};

use ndarray::Array2;
use thiserror::Error;

use super::{ActivationError, ActivationMatrix};

pub const CONTAINER_MAGIC: [u8; 4] = *b"TACS";
pub const CONTAINER_VERSION: u32 = 1;
pub const FLAG_LOSSES: u32 = 1;
const HEADER_LEN: u64 = 4 + 4 + 8;

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("not a TACS container (magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("unsupported TACS version {0}")]
    UnsupportedVersion(u32),
    #[error("container truncated in document {index} (pmid {pmid:?}) at byte {offset}")]
    Truncated {
        index: u64,
        pmid: Option<u64>,
        offset: u64,
    },
    #[error("pmid {pmid} (block at byte {offset}): {reason}")]
    Malformed {
        pmid: u64,
        offset: u64,
        reason: String,
    },
    #[error("pmid {pmid}: token {token} is {len} bytes, the limit is 65535")]
    TokenTooLong { pmid: u64, token: usize, len: usize },
    #[error("pmid {pmid}: block of {len} bytes does not fit a u32 length")]
    BlockTooLarge { pmid: u64, len: usize },
    #[error(transparent)]
    Invalid(#[from] ActivationError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl ContainerError {
    /// The pmid of the document that failed, when known.
    pub fn pmid(&self) -> Option<u64> {
        match self {
            ContainerError::Truncated { pmid, .. } => *pmid,
            ContainerError::Malformed { pmid, .. }
            | ContainerError::TokenTooLong { pmid, .. }
            | ContainerError::BlockTooLarge { pmid, .. } => Some(*pmid),
            ContainerError::Invalid(e) => Some(match e {
                ActivationError::LengthMismatch { pmid, .. }
                | ActivationError::NonFiniteActivation { pmid, .. }
                | ActivationError::LossCount { pmid, .. }
                | ActivationError::BadLoss { pmid, .. } => *pmid,
            }),
            _ => None,
        }
    }
}

fn encode_block(doc: &ActivationMatrix) -> Result<Vec<u8>, ContainerError> {
    let t = doc.len();
    let d = doc.dim();
    let mut block = Vec::with_capacity(12 + t * (3 + 4 * d));
    let flags = if doc.losses().is_some() { FLAG_LOSSES } else { 0 };
    block.extend_from_slice(&(d as u32).to_le_bytes());
    block.extend_from_slice(&(t as u32).to_le_bytes());
    block.extend_from_slice(&flags.to_le_bytes());
    for (i, token) in doc.tokens().iter().enumerate() {
        let len = u16::try_from(token.len()).map_err(|_| ContainerError::TokenTooLong {
            pmid: doc.pmid(),
            token: i,
            len: token.len(),
        })?;
        block.extend_from_slice(&len.to_le_bytes());
        block.extend_from_slice(token.as_bytes());
    }
    block.extend(doc.special_mask().iter().map(|&s| s as u8));
    for v in doc.rows().iter() {
        block.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(losses) = doc.losses() {
        for l in losses {
            block.extend_from_slice(&l.to_le_bytes());
        }
    }
    Ok(block)
}

/// Serializes `docs` and returns the number of bytes written.
pub fn write_container<W: Write>(docs: &[ActivationMatrix], mut sink: W) -> Result<u64, ContainerError> {
    sink.write_all(&CONTAINER_MAGIC)?;
    sink.write_all(&CONTAINER_VERSION.to_le_bytes())?;
    sink.write_all(&(docs.len() as u64).to_le_bytes())?;
    let mut written = HEADER_LEN;
    for doc in docs {
        let block = encode_block(doc)?;
        let len = u32::try_from(block.len()).map_err(|_| ContainerError::BlockTooLarge {
            pmid: doc.pmid(),
            len: block.len(),
        })?;
        sink.write_all(&doc.pmid().to_le_bytes())?;
        sink.write_all(&len.to_le_bytes())?;
        sink.write_all(&block)?;
        written += 12 + block.len() as u64;
    }
    sink.flush()?;
    Ok(written)
}

/// Reads every document in a container.
pub fn read_container<R: Read>(source: R) -> Result<Vec<ActivationMatrix>, ContainerError> {
    ContainerReader::new(source)?.collect()
}

/// Sequential reader over the documents of a container.
pub struct ContainerReader<R> {
    source: R,
    count: u64,
    index: u64,
    offset: u64,
}

impl<R: Read> ContainerReader<R> {
    pub fn new(mut source: R) -> Result<Self, ContainerError> {
        let mut header = [0u8; HEADER_LEN as usize];
        source.read_exact(&mut header).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => ContainerError::Truncated {
                index: 0,
                pmid: None,
                offset: 0,
            },
            _ => ContainerError::Io(e),
        })?;
        let magic: [u8; 4] = header[0..4].try_into().unwrap();
        if magic != CONTAINER_MAGIC {
            return Err(ContainerError::BadMagic(magic));
        }
        let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
        if version != CONTAINER_VERSION {
            return Err(ContainerError::UnsupportedVersion(version));
        }
        let count = u64::from_le_bytes(header[8..16].try_into().unwrap());
        Ok(ContainerReader {
            source,
            count,
            index: 0,
            offset: HEADER_LEN,
        })
    }

    /// Document count declared in the header.
    pub fn declared_count(&self) -> u64 {
        self.count
    }

    fn fill(&mut self, buf: &mut [u8], pmid: Option<u64>) -> Result<(), ContainerError> {
        self.source.read_exact(buf).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => ContainerError::Truncated {
                index: self.index,
                pmid,
                offset: self.offset,
            },
            _ => ContainerError::Io(e),
        })?;
        self.offset += buf.len() as u64;
        Ok(())
    }

    fn read_document(&mut self) -> Result<ActivationMatrix, ContainerError> {
        let mut frame = [0u8; 12];
        self.fill(&mut frame, None)?;
        let pmid = u64::from_le_bytes(frame[0..8].try_into().unwrap());
        let len = u32::from_le_bytes(frame[8..12].try_into().unwrap()) as usize;
        let block_offset = self.offset;
        let mut block = vec![0u8; len];
        self.fill(&mut block, Some(pmid))?;
        decode_block(pmid, block_offset, &block)
    }
}

impl<R: Read> Iterator for ContainerReader<R> {
    type Item = Result<ActivationMatrix, ContainerError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.index >= self.count {
            return None;
        }
        let doc = self.read_document();
        self.index += 1;
        if doc.is_err() {
            // framing is lost after an error; stop
            self.count = self.index;
        }
        Some(doc)
    }
}

struct BlockCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    pmid: u64,
    offset: u64,
}

impl<'a> BlockCursor<'a> {
    fn malformed(&self, reason: impl Into<String>) -> ContainerError {
        ContainerError::Malformed {
            pmid: self.pmid,
            offset: self.offset,
            reason: reason.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], ContainerError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&end| end <= self.bytes.len())
            .ok_or_else(|| {
                self.malformed(format!(
                    "block length {} too short for {what}",
                    self.bytes.len()
                ))
            })?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<u32, ContainerError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

fn decode_block(pmid: u64, offset: u64, bytes: &[u8]) -> Result<ActivationMatrix, ContainerError> {
    let mut cur = BlockCursor {
        bytes,
        pos: 0,
        pmid,
        offset,
    };
    let d = cur.u32("dimension")? as usize;
    let t = cur.u32("token count")? as usize;
    let flags = cur.u32("flags")?;
    if flags & !FLAG_LOSSES != 0 {
        return Err(cur.malformed(format!("unknown flag bits {flags:#x}")));
    }

    let mut tokens = Vec::with_capacity(t.min(bytes.len()));
    for i in 0..t {
        let len = u16::from_le_bytes(cur.take(2, "token length")?.try_into().unwrap()) as usize;
        let raw = cur.take(len, "token bytes")?;
        let token = std::str::from_utf8(raw)
            .map_err(|_| cur.malformed(format!("token {i} is not UTF-8")))?;
        tokens.push(token.to_string());
    }

    let mask_bytes = cur.take(t, "special mask")?;
    let mut special_mask = Vec::with_capacity(t);
    for (i, &b) in mask_bytes.iter().enumerate() {
        match b {
            0 => special_mask.push(false),
            1 => special_mask.push(true),
            other => return Err(cur.malformed(format!("mask byte {other} at token {i}"))),
        }
    }

    let n_values = t
        .checked_mul(d)
        .ok_or_else(|| cur.malformed("T x D overflows"))?;
    let raw = cur.take(
        n_values
            .checked_mul(4)
            .ok_or_else(|| cur.malformed("T x D overflows"))?,
        "activations",
    )?;
    let values: Vec<f32> = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let rows = Array2::from_shape_vec((t, d), values).expect("length checked");

    let losses = if flags & FLAG_LOSSES != 0 {
        let raw = cur.take(4 * t, "losses (flag bit 0 is set)")?;
        Some(
            raw.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        )
    } else {
        None
    };

    if cur.pos != bytes.len() {
        return Err(cur.malformed(format!(
            "{} trailing bytes after document",
            bytes.len() - cur.pos
        )));
    }
    Ok(ActivationMatrix::new(pmid, tokens, special_mask, rows, losses)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn doc(pmid: u64, t: usize, d: usize, losses: bool) -> ActivationMatrix {
        let tokens = (0..t).map(|i| format!("tok{i}")).collect();
        let mut mask = vec![false; t];
        mask[0] = true;
        let rows = Array2::from_shape_fn((t, d), |(i, j)| (i * d + j) as f32 * 0.5 - 1.0);
        let losses = losses.then(|| (0..t).map(|i| i as f32 * 0.1).collect());
        ActivationMatrix::new(pmid, tokens, mask, rows, losses).unwrap()
    }

    #[test]
    fn two_document_round_trip() {
        let docs = vec![doc(11, 4, 8, false), doc(12, 3, 8, true)];
        let mut bytes = Vec::new();
        let n = write_container(&docs, &mut bytes).unwrap();
        assert_eq!(n as usize, bytes.len());
        assert_eq!(read_container(&bytes[..]).unwrap(), docs);
    }

    #[test]
    fn empty_container() {
        let mut bytes = Vec::new();
        write_container(&[], &mut bytes).unwrap();
        assert_eq!(bytes.len(), 16);
        assert!(read_container(&bytes[..]).unwrap().is_empty());
    }

    #[test]
    fn loss_flag_without_losses_is_rejected() {
        let mut bytes = Vec::new();
        write_container(&[doc(5, 3, 2, false)], &mut bytes).unwrap();
        // flags live right after D and T in the block: 16 header + 12 frame + 8
        bytes[36] = 1;
        match read_container(&bytes[..]) {
            Err(ContainerError::Malformed { pmid, reason, .. }) => {
                assert_eq!(pmid, 5);
                assert!(reason.contains("losses"), "{reason}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncation_names_the_document() {
        let mut bytes = Vec::new();
        write_container(&[doc(1, 2, 2, false), doc(77, 2, 2, false)], &mut bytes).unwrap();
        bytes.truncate(bytes.len() - 5);
        let err = read_container(&bytes[..]).unwrap_err();
        assert_eq!(err.pmid(), Some(77));
        assert!(matches!(err, ContainerError::Truncated { index: 1, .. }));
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = Vec::new();
        write_container(&[], &mut bytes).unwrap();
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(matches!(read_container(&wrong[..]), Err(ContainerError::BadMagic(_))));
        bytes[4] = 2;
        assert!(matches!(
            read_container(&bytes[..]),
            Err(ContainerError::UnsupportedVersion(2))
        ));
    }

    #[test]
    fn bad_mask_byte() {
        let mut bytes = Vec::new();
        write_container(&[doc(3, 1, 1, false)], &mut bytes).unwrap();
        // header 16 + frame 12 + D,T,flags 12 + token (2 + 4)
        bytes[16 + 12 + 12 + 6] = 7;
        assert!(matches!(
            read_container(&bytes[..]),
            Err(ContainerError::Malformed { pmid: 3, .. })
        ));
    }
}
