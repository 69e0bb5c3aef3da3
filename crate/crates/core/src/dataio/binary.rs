//! Little-endian binary containers.
//!
//! Matrix block:
//! - magic `NPULRN01` (8 bytes; the last two bytes are the format version)
//! - dtype: u32 (0 = f32, 1 = f64, 2 = u32)
//! - rows: u32, cols: u32
//! - payload: rows × cols values, row-major
//!
//! Dataset file:
//! - magic `NPULDS01`, sample count n: u32
//! - features block (f32 or f64, n × D)
//! - domain label block (u32, n × 1)
//! - class label block (u32, n × 1)

use std::fs;
use std::path::Path;

use crate::error::{Error, FormatError, Result};
use crate::evaluation::LabeledEmbeddingSet;
use crate::linalg::Matrix;

pub const MATRIX_MAGIC: &[u8; 8] = b"NPULRN01";
pub const DATASET_MAGIC: &[u8; 8] = b"NPULDS01";
const MAGIC_FAMILY_LEN: usize = 6;
const HEADER_LEN: usize = 8 + 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
    U32,
}

impl Dtype {
    fn code(self) -> u32 {
        match self {
            Dtype::F32 => 0,
            Dtype::F64 => 1,
            Dtype::U32 => 2,
        }
    }

    fn from_code(code: u32) -> std::result::Result<Self, FormatError> {
        match code {
            0 => Ok(Dtype::F32),
            1 => Ok(Dtype::F64),
            2 => Ok(Dtype::U32),
            other => Err(FormatError::UnsupportedDtype(other)),
        }
    }

    fn width(self) -> usize {
        match self {
            Dtype::F64 => 8,
            Dtype::F32 | Dtype::U32 => 4,
        }
    }
}

/// A decoded block: real values widen to `f64`, labels stay `u32`.
#[derive(Clone, Debug, PartialEq)]
pub enum Block {
    Real { dtype: Dtype, matrix: Matrix },
    Labels { rows: usize, cols: usize, values: Vec<u32> },
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], FormatError> {
        if self.remaining() < n {
            return Err(FormatError::Truncated { needed: n, available: self.remaining() });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> std::result::Result<u32, FormatError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn magic(&mut self, expected: &[u8; 8]) -> std::result::Result<(), FormatError> {
        if self.remaining() < 8 {
            return Err(FormatError::BadMagic);
        }
        let found = self.take(8)?;
        if found == expected {
            return Ok(());
        }
        if found[..MAGIC_FAMILY_LEN] == expected[..MAGIC_FAMILY_LEN] {
            return Err(FormatError::VersionMismatch {
                found: String::from_utf8_lossy(found).into_owned(),
                expected: String::from_utf8_lossy(expected).into_owned(),
            });
        }
        Err(FormatError::BadMagic)
    }

    fn block(&mut self) -> std::result::Result<Block, FormatError> {
        self.magic(MATRIX_MAGIC)?;
        let dtype = Dtype::from_code(self.u32()?)?;
        let rows = self.u32()? as u64;
        let cols = self.u32()? as u64;
        let len = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(dtype.width() as u64))
            .and_then(|n| usize::try_from(n).ok())
            .ok_or(FormatError::DimensionOverflow { rows, cols })?;
        let payload = self.take(len)?;
        let (rows, cols) = (rows as usize, cols as usize);
        match dtype {
            Dtype::U32 => {
                let values = payload
                    .chunks_exact(4)
                    .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect();
                Ok(Block::Labels { rows, cols, values })
            }
            Dtype::F32 | Dtype::F64 => {
                let data: Vec<f64> = if dtype == Dtype::F32 {
                    payload.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect()
                } else {
                    payload
                        .chunks_exact(8)
                        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                        .collect()
                };
                if data.iter().any(|v| !v.is_finite()) {
                    return Err(FormatError::NonFinite);
                }
                let matrix = Matrix::new(rows, cols, data).map_err(|_| FormatError::NonFinite)?;
                Ok(Block::Real { dtype, matrix })
            }
        }
    }

    fn finish(&self) -> std::result::Result<(), FormatError> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(FormatError::TrailingBytes(n)),
        }
    }
}

fn dims_u32(rows: usize, cols: usize) -> Result<(u32, u32)> {
    match (u32::try_from(rows), u32::try_from(cols)) {
        (Ok(r), Ok(c)) => Ok((r, c)),
        _ => Err(FormatError::DimensionOverflow { rows: rows as u64, cols: cols as u64 }.into()),
    }
}

fn write_header(out: &mut Vec<u8>, dtype: Dtype, rows: usize, cols: usize) -> Result<()> {
    let (r, c) = dims_u32(rows, cols)?;
    out.extend_from_slice(MATRIX_MAGIC);
    out.extend_from_slice(&dtype.code().to_le_bytes());
    out.extend_from_slice(&r.to_le_bytes());
    out.extend_from_slice(&c.to_le_bytes());
    Ok(())
}

/// Serializes a real matrix as `F32` or `F64`.
pub fn encode_matrix(m: &Matrix, dtype: Dtype) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(HEADER_LEN + m.data().len() * dtype.width());
    write_header(&mut out, dtype, m.rows(), m.cols())?;
    match dtype {
        Dtype::F32 => m.data().iter().for_each(|&v| out.extend_from_slice(&(v as f32).to_le_bytes())),
        Dtype::F64 => m.data().iter().for_each(|&v| out.extend_from_slice(&v.to_le_bytes())),
        Dtype::U32 => return Err(Error::InvalidConfig("real matrices are stored as f32 or f64".into())),
    }
    Ok(out)
}

fn encode_labels(out: &mut Vec<u8>, labels: &[u32]) -> Result<()> {
    write_header(out, Dtype::U32, labels.len(), 1)?;
    labels.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
    Ok(())
}

pub fn decode_block(bytes: &[u8]) -> Result<Block> {
    let mut r = Reader::new(bytes);
    let block = r.block()?;
    r.finish()?;
    Ok(block)
}

pub fn decode_matrix(bytes: &[u8]) -> Result<Matrix> {
    match decode_block(bytes)? {
        Block::Real { matrix, .. } => Ok(matrix),
        Block::Labels { .. } => Err(FormatError::UnexpectedBlock("expected a real matrix, found labels".into()).into()),
    }
}

pub fn encode_dataset(set: &LabeledEmbeddingSet, dtype: Dtype) -> Result<Vec<u8>> {
    let n = u32::try_from(set.len())
        .map_err(|_| FormatError::DimensionOverflow { rows: set.len() as u64, cols: 1 })?;
    let mut out = Vec::new();
    out.extend_from_slice(DATASET_MAGIC);
    out.extend_from_slice(&n.to_le_bytes());
    out.extend(encode_matrix(&set.features, dtype)?);
    encode_labels(&mut out, &set.domains)?;
    encode_labels(&mut out, &set.classes)?;
    Ok(out)
}

pub fn decode_dataset(bytes: &[u8]) -> Result<LabeledEmbeddingSet> {
    let mut r = Reader::new(bytes);
    r.magic(DATASET_MAGIC)?;
    let n = r.u32()? as usize;
    let features = match r.block()? {
        Block::Real { matrix, .. } if matrix.rows() == n => matrix,
        Block::Real { matrix, .. } => {
            return Err(FormatError::UnexpectedBlock(format!("{} feature rows, header says {n}", matrix.rows())).into())
        }
        Block::Labels { .. } => return Err(FormatError::UnexpectedBlock("features must be real".into()).into()),
    };
    let mut labels = |what: &str| -> Result<Vec<u32>> {
        match r.block()? {
            Block::Labels { rows, cols: 1, values } if rows == n => Ok(values),
            _ => Err(FormatError::UnexpectedBlock(format!("{what} labels must be a u32 {n}x1 block")).into()),
        }
    };
    let domains = labels("domain")?;
    let classes = labels("class")?;
    r.finish()?;
    LabeledEmbeddingSet::new(features, domains, classes)
}

pub fn save_matrix(path: impl AsRef<Path>, m: &Matrix, dtype: Dtype) -> Result<()> {
    fs::write(path, encode_matrix(m, dtype)?)?;
    Ok(())
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    decode_matrix(&fs::read(path)?)
}

pub fn save_dataset(path: impl AsRef<Path>, set: &LabeledEmbeddingSet, dtype: Dtype) -> Result<()> {
    fs::write(path, encode_dataset(set, dtype)?)?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<LabeledEmbeddingSet> {
    decode_dataset(&fs::read(path)?)
}
