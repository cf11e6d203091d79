//! Versioned binary container for named tensors plus a JSON header.
//!
//! ```text
//! "DBAPCKPT" | version: u32 | header_len: u64 | header: utf-8 JSON
//! | count: u32 | { name_len: u32 | name | rank: u32 | dims: u64 x rank | f64 x numel }
//! ```
//! All integers and floats are little endian.

use std::io::{Read, Write};

use super::{NnetError, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DBAPCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(
    out: &mut W,
    header: &serde_json::Value,
    tensors: &[(&str, &Tensor)],
) -> Result<(), NnetError> {
    let header = serde_json::to_vec(header).map_err(|e| NnetError::Checkpoint(e.to_string()))?;
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(header.len() as u64).to_le_bytes());
    buf.extend_from_slice(&header);
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &x in t.data() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    out.write_all(&buf)
        .map_err(|e| NnetError::Checkpoint(e.to_string()))
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnetError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| NnetError::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NnetError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64, NnetError> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

pub type NamedTensors = Vec<(String, Tensor)>;

pub fn read_checkpoint<R: Read>(
    input: &mut R,
) -> Result<(serde_json::Value, NamedTensors), NnetError> {
    let mut buf = Vec::new();
    input
        .read_to_end(&mut buf)
        .map_err(|e| NnetError::Checkpoint(e.to_string()))?;
    let mut c = Cursor { buf: &buf, pos: 0 };
    if c.take(8)? != CHECKPOINT_MAGIC {
        return Err(NnetError::Checkpoint("not a checkpoint file".into()));
    }
    let version = c.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(NnetError::Checkpoint(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let header_len = c.u64()? as usize;
    let header: serde_json::Value = serde_json::from_slice(c.take(header_len)?)
        .map_err(|e| NnetError::Checkpoint(e.to_string()))?;
    let count = c.u32()? as usize;
    let mut tensors = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let len = c.u32()? as usize;
        let name = String::from_utf8(c.take(len)?.to_vec())
            .map_err(|e| NnetError::Checkpoint(e.to_string()))?;
        let rank = c.u32()? as usize;
        let shape = (0..rank)
            .map(|_| c.u64().map(|d| d as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let numel: usize = shape.iter().product();
        let raw = c.take(
            numel
                .checked_mul(8)
                .ok_or_else(|| NnetError::Checkpoint("tensor too large".into()))?,
        )?;
        let data = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        tensors.push((name, Tensor::new(shape, data)?));
    }
    if c.pos != buf.len() {
        return Err(NnetError::Checkpoint("trailing bytes after tensors".into()));
    }
    Ok((header, tensors))
}
