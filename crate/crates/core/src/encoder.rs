//! Unit vector providers and the binary embedding interchange format.
//!
//! Binary layout (little endian):
//!
//! ```text
//! "AEMB" | version: u16 | d: u32 | records... | crc32: u32
//! record = doc_id_len: u32 | doc_id: utf-8 | unit_index: u32 | d x f32
//! ```
//!
//! The CRC covers every byte before it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::Document;

pub const MAGIC: &[u8; 4] = b"AEMB";
pub const FORMAT_VERSION: u16 = 1;
pub const DEFAULT_HASH_DIM: usize = 64;

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt embedding file: {0}")]
    Corruption(String),
    #[error("embedding format error: {0}")]
    Format(String),
    #[error("no embedding for unit {unit} of document {doc_id:?}")]
    Missing { doc_id: String, unit: usize },
    #[error("dimension must be at least 8, got {0}")]
    Dimension(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitEmbedding {
    pub doc_id: String,
    /// 1-based unit index.
    pub unit_index: usize,
    pub vector: Vec<f64>,
}

/// `(n + 1) x d` input matrix; row 0 is the root vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub rows: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn new(root: &[f64], units: &[Vec<f64>]) -> Result<EmbeddingMatrix, EncoderError> {
        let dim = root.len();
        let mut data = Vec::with_capacity((units.len() + 1) * dim);
        data.extend_from_slice(root);
        for (i, v) in units.iter().enumerate() {
            if v.len() != dim {
                return Err(EncoderError::Format(format!(
                    "unit {} has dimension {}, expected {dim}",
                    i + 1,
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(EncoderError::Format(format!(
                    "unit {} has non-finite entries",
                    i + 1
                )));
            }
            data.extend_from_slice(v);
        }
        Ok(EmbeddingMatrix {
            rows: units.len() + 1,
            dim,
            data,
        })
    }

    pub fn unit_count(&self) -> usize {
        self.rows - 1
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Source of fixed-dimension unit vectors.
pub trait EmbeddingProvider: Sync {
    fn dim(&self) -> usize;
    /// One vector per unit, in unit order.
    fn embed(&self, doc: &Document) -> Result<Vec<Vec<f64>>, EncoderError>;
}

// ---- hash encoder -----------------------------------------------------------

/// Deterministic character n-gram (n = 2, 3) feature-hashing encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEncoder {
    pub dim: usize,
    pub seed: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn hash_gram(gram: &[char], seed: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ splitmix64(seed);
    let mut buf = [0u8; 4];
    for c in gram {
        for b in c.encode_utf8(&mut buf).bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h ^= 0xff;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(h)
}

/// Boundary-padded character n-grams of `text` for n = 2 and 3.
pub fn char_ngrams(text: &str) -> Vec<String> {
    let chars: Vec<char> = std::iter::once('^')
        .chain(text.chars())
        .chain(std::iter::once('$'))
        .collect();
    let mut out = Vec::new();
    for n in 2..=3 {
        for w in chars.windows(n) {
            out.push(w.iter().collect());
        }
    }
    out
}

impl HashEncoder {
    pub fn new(dim: usize, seed: u64) -> Result<HashEncoder, EncoderError> {
        if dim < 8 {
            return Err(EncoderError::Dimension(dim));
        }
        Ok(HashEncoder { dim, seed })
    }

    /// Returns the L2-normalized vector and a warning flag that is set when
    /// the text is empty (the vector is then all zeros).
    pub fn encode(&self, text: &str) -> (Vec<f64>, bool) {
        let mut v = vec![0.0; self.dim];
        if text.is_empty() {
            return (v, true);
        }
        let chars: Vec<char> = std::iter::once('^')
            .chain(text.chars())
            .chain(std::iter::once('$'))
            .collect();
        for n in 2..=3 {
            for gram in chars.windows(n) {
                let h = hash_gram(gram, self.seed);
                let bucket = (h % self.dim as u64) as usize;
                let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
                v[bucket] += sign;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return (v, true);
        }
        v.iter_mut().for_each(|x| *x /= norm);
        (v, false)
    }
}

impl EmbeddingProvider for HashEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, doc: &Document) -> Result<Vec<Vec<f64>>, EncoderError> {
        Ok(doc.units.iter().map(|u| self.encode(&u.text).0).collect())
    }
}

/// Root vector with entries drawn uniformly from [-0.1, 0.1].
pub fn make_root_vector(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim).map(|_| rng.random_range(-0.1..=0.1)).collect()
}

// ---- file-backed embeddings -------------------------------------------------

/// Embeddings loaded from a binary file, grouped by document.
#[derive(Debug, Clone, PartialEq)]
pub struct FileEmbeddings {
    pub dim: usize,
    pub docs: BTreeMap<String, Vec<UnitEmbedding>>,
}

impl EmbeddingProvider for FileEmbeddings {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, doc: &Document) -> Result<Vec<Vec<f64>>, EncoderError> {
        let records = self
            .docs
            .get(&doc.id)
            .ok_or_else(|| EncoderError::Missing {
                doc_id: doc.id.clone(),
                unit: 1,
            })?;
        (1..=doc.len())
            .map(|unit| {
                records
                    .iter()
                    .find(|r| r.unit_index == unit)
                    .map(|r| r.vector.clone())
                    .ok_or_else(|| EncoderError::Missing {
                        doc_id: doc.id.clone(),
                        unit,
                    })
            })
            .collect()
    }
}

pub fn encode_embeddings(dim: usize, records: &[UnitEmbedding]) -> Result<Vec<u8>, EncoderError> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for r in records {
        if r.vector.len() != dim {
            return Err(EncoderError::Format(format!(
                "record {}#{} has dimension {}, header says {dim}",
                r.doc_id,
                r.unit_index,
                r.vector.len()
            )));
        }
        out.extend_from_slice(&(r.doc_id.len() as u32).to_le_bytes());
        out.extend_from_slice(r.doc_id.as_bytes());
        out.extend_from_slice(&(r.unit_index as u32).to_le_bytes());
        for &x in &r.vector {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], EncoderError> {
        if self.pos + n > self.buf.len() {
            return Err(EncoderError::Corruption(format!(
                "truncated record at byte {}",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, EncoderError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }
}

pub fn decode_embeddings(bytes: &[u8]) -> Result<FileEmbeddings, EncoderError> {
    if bytes.len() < 14 {
        return Err(EncoderError::Corruption(
            "file shorter than header and checksum".into(),
        ));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    if crc32fast::hash(body) != stored {
        return Err(EncoderError::Corruption("checksum mismatch".into()));
    }
    if &body[..4] != MAGIC {
        return Err(EncoderError::Format("bad magic bytes".into()));
    }
    let version = u16::from_le_bytes([body[4], body[5]]);
    if version != FORMAT_VERSION {
        return Err(EncoderError::Format(format!(
            "unsupported version {version}"
        )));
    }
    let mut r = Reader { buf: body, pos: 6 };
    let dim = r.u32()? as usize;
    let mut docs: BTreeMap<String, Vec<UnitEmbedding>> = BTreeMap::new();
    while r.pos < body.len() {
        let len = r.u32()? as usize;
        let doc_id = String::from_utf8(r.take(len)?.to_vec())
            .map_err(|_| EncoderError::Format("document id is not UTF-8".into()))?;
        let unit_index = r.u32()? as usize;
        let raw = r.take(4 * dim)?;
        let vector = raw
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
            .collect();
        docs.entry(doc_id.clone()).or_default().push(UnitEmbedding {
            doc_id,
            unit_index,
            vector,
        });
    }
    for records in docs.values_mut() {
        records.sort_by_key(|r| r.unit_index);
    }
    Ok(FileEmbeddings { dim, docs })
}

pub fn write_embeddings(
    path: &Path,
    dim: usize,
    records: &[UnitEmbedding],
) -> Result<(), EncoderError> {
    let bytes = encode_embeddings(dim, records)?;
    std::fs::write(path, bytes).map_err(|source| EncoderError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_embeddings(path: &Path) -> Result<FileEmbeddings, EncoderError> {
    let bytes = std::fs::read(path).map_err(|source| EncoderError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_embeddings(&bytes)
}

/// Loads several files and checks they agree on the dimension.
pub fn load_embedding_files(paths: &[PathBuf]) -> Result<FileEmbeddings, EncoderError> {
    let mut merged: Option<FileEmbeddings> = None;
    for p in paths {
        let e = load_embeddings(p)?;
        match &mut merged {
            None => merged = Some(e),
            Some(m) => {
                if m.dim != e.dim {
                    return Err(EncoderError::Format(format!(
                        "{} has dimension {}, earlier files {}",
                        p.display(),
                        e.dim,
                        m.dim
                    )));
                }
                m.docs.extend(e.docs);
            }
        }
    }
    merged.ok_or_else(|| EncoderError::Format("no embedding files given".into()))
}
