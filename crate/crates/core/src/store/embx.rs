//! EMBX v1: a little-endian container for labeled `f32` embeddings.
//!
//! ```text
//! offset  size       field
//! 0       4          magic "EMBX"
//! 4       4          u32 version (1)
//! 8       4          u32 cls_dim
//! 12      4          u32 num_classes
//! 16      8          u64 rows
//! 24      4          u32 metadata length M
//! 28      M          UTF-8 metadata, one `key=value` per line
//! 28+M    rows × R   records: i32 label, cls_dim × f32   (R = 4 + 4·cls_dim)
//! end-4   4          CRC32 of every preceding byte
//! ```
//!
//! The checksum is verified before any field is trusted.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::store::{EmbeddingDataset, Split, UNLABELED};

pub const EMBX_MAGIC: &[u8; 4] = b"EMBX";
pub const EMBX_VERSION: u32 = 1;
const FIXED_HEADER: usize = 28;
const TRAILER: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct EmbxHeader {
    pub version: u32,
    pub cls_dim: usize,
    pub num_classes: usize,
    pub rows: u64,
    pub split: Split,
    pub metadata: Vec<(String, String)>,
    /// Byte offset of the first record.
    pub payload_offset: u64,
}

impl EmbxHeader {
    pub fn record_len(&self) -> u64 {
        4 + 4 * self.cls_dim as u64
    }

    /// Size of a well-formed file with this header, or `None` on overflow.
    pub fn total_len(&self) -> Option<u64> {
        self.rows
            .checked_mul(self.record_len())?
            .checked_add(self.payload_offset)?
            .checked_add(TRAILER as u64)
    }
}

fn format_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        offset: offset as u64,
        message: message.into(),
    }
}

fn u32_at(bytes: &[u8], off: usize) -> u32 {
    u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap())
}

/// True when the trailing CRC32 matches the preceding bytes.
pub fn crc_ok(bytes: &[u8]) -> bool {
    if bytes.len() < TRAILER {
        return false;
    }
    let (body, trailer) = bytes.split_at(bytes.len() - TRAILER);
    crc32fast::hash(body) == u32::from_le_bytes(trailer.try_into().unwrap())
}

/// Parses and validates the header without touching records or checksum.
pub fn parse_header(bytes: &[u8]) -> Result<EmbxHeader> {
    if bytes.len() < FIXED_HEADER {
        return Err(Error::Length {
            expected: FIXED_HEADER as u64,
            actual: bytes.len() as u64,
        });
    }
    if &bytes[0..4] != EMBX_MAGIC {
        return Err(format_err(0, "bad magic, expected \"EMBX\""));
    }
    let version = u32_at(bytes, 4);
    if version != EMBX_VERSION {
        return Err(format_err(4, format!("unsupported version {version}")));
    }
    let cls_dim = u32_at(bytes, 8) as usize;
    if cls_dim == 0 {
        return Err(format_err(8, "cls_dim is zero"));
    }
    let num_classes = u32_at(bytes, 12) as usize;
    if num_classes == 0 {
        return Err(format_err(12, "num_classes is zero"));
    }
    let rows = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    if rows == 0 {
        return Err(format_err(16, "row count is zero"));
    }
    let meta_len = u32_at(bytes, 24) as usize;
    let meta_end = FIXED_HEADER + meta_len;
    if bytes.len() < meta_end {
        return Err(Error::Length {
            expected: meta_end as u64,
            actual: bytes.len() as u64,
        });
    }
    let text = std::str::from_utf8(&bytes[FIXED_HEADER..meta_end])
        .map_err(|e| format_err(FIXED_HEADER + e.valid_up_to(), "metadata is not UTF-8"))?;

    let mut metadata = Vec::new();
    let mut split = None;
    let mut offset = FIXED_HEADER;
    for line in text.split_inclusive('\n') {
        let entry = line.strip_suffix('\n').unwrap_or(line);
        if !entry.is_empty() {
            let (k, v) = entry
                .split_once('=')
                .filter(|(k, _)| !k.is_empty())
                .ok_or_else(|| format_err(offset, "metadata line is not key=value"))?;
            if k == "split" {
                let parsed = v
                    .parse()
                    .map_err(|_| format_err(offset, format!("split must be train or test, found `{v}`")))?;
                split = Some(parsed);
            } else {
                metadata.push((k.to_string(), v.to_string()));
            }
        }
        offset += line.len();
    }
    let split = split.ok_or_else(|| format_err(FIXED_HEADER, "metadata has no split entry"))?;

    let header = EmbxHeader {
        version,
        cls_dim,
        num_classes,
        rows,
        split,
        metadata,
        payload_offset: meta_end as u64,
    };
    if header.total_len().is_none() {
        return Err(format_err(16, "row count overflows the file size"));
    }
    Ok(header)
}

fn metadata_text(ds: &EmbeddingDataset) -> String {
    let mut text = format!("split={}\n", ds.split);
    for (k, v) in &ds.metadata {
        text.push_str(k);
        text.push('=');
        text.push_str(v);
        text.push('\n');
    }
    text
}

pub fn encode_embx(ds: &EmbeddingDataset) -> Result<Vec<u8>> {
    ds.validate()?;
    let narrow = |v: usize, what: &str| u32::try_from(v).map_err(|_| Error::Contract(format!("{what} {v} does not fit in u32")));
    let meta = metadata_text(ds);
    let mut out = Vec::with_capacity(FIXED_HEADER + meta.len() + ds.len() * (4 + 4 * ds.cls_dim) + TRAILER);
    out.extend_from_slice(EMBX_MAGIC);
    out.extend_from_slice(&EMBX_VERSION.to_le_bytes());
    out.extend_from_slice(&narrow(ds.cls_dim, "cls_dim")?.to_le_bytes());
    out.extend_from_slice(&narrow(ds.num_classes, "num_classes")?.to_le_bytes());
    out.extend_from_slice(&(ds.len() as u64).to_le_bytes());
    out.extend_from_slice(&narrow(meta.len(), "metadata length")?.to_le_bytes());
    out.extend_from_slice(meta.as_bytes());
    for (i, &label) in ds.labels.iter().enumerate() {
        out.extend_from_slice(&label.to_le_bytes());
        for v in ds.row(i) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

pub fn decode_embx(bytes: &[u8]) -> Result<EmbeddingDataset> {
    let header = checked_header(bytes)?;
    let mut labels = Vec::with_capacity(header.rows as usize);
    let mut embeddings = Vec::with_capacity(header.rows as usize * header.cls_dim);
    let mut off = header.payload_offset as usize;
    for _ in 0..header.rows {
        let label = i32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
        if label != UNLABELED && !(0..header.num_classes as i64).contains(&(label as i64)) {
            return Err(format_err(off, format!("label {label} outside [0, {})", header.num_classes)));
        }
        labels.push(label);
        off += 4;
        for _ in 0..header.cls_dim {
            let v = f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
            if !v.is_finite() {
                return Err(format_err(off, "non-finite embedding value"));
            }
            embeddings.push(v);
            off += 4;
        }
    }
    Ok(EmbeddingDataset {
        cls_dim: header.cls_dim,
        num_classes: header.num_classes,
        split: header.split,
        metadata: header.metadata,
        labels,
        embeddings,
    })
}

/// Checksum first, then header, then the size implied by the header.
fn checked_header(bytes: &[u8]) -> Result<EmbxHeader> {
    let min = (FIXED_HEADER + TRAILER) as u64;
    if (bytes.len() as u64) < min {
        return Err(Error::Length {
            expected: min,
            actual: bytes.len() as u64,
        });
    }
    if !crc_ok(bytes) {
        // A header that parses but disagrees with the file size is the
        // signature of truncation; anything else is reported as corruption.
        if let Ok(h) = parse_header(bytes) {
            if let Some(total) = h.total_len().filter(|&t| t > bytes.len() as u64) {
                return Err(Error::Length {
                    expected: total,
                    actual: bytes.len() as u64,
                });
            }
        }
        return Err(format_err(bytes.len() - TRAILER, "crc32 mismatch"));
    }
    let header = parse_header(bytes)?;
    let total = header.total_len().expect("checked in parse_header");
    if total != bytes.len() as u64 {
        return Err(Error::Length {
            expected: total,
            actual: bytes.len() as u64,
        });
    }
    Ok(header)
}

pub fn write_embx(path: impl AsRef<Path>, ds: &EmbeddingDataset) -> Result<()> {
    fs::write(path, encode_embx(ds)?)?;
    Ok(())
}

pub fn read_embx(path: impl AsRef<Path>) -> Result<EmbeddingDataset> {
    decode_embx(&fs::read(path)?)
}

/// Verifies the checksum and returns the header only.
pub fn inspect_embx(path: impl AsRef<Path>) -> Result<EmbxHeader> {
    checked_header(&fs::read(path)?)
}
