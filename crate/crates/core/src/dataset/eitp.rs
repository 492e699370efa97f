//! "EITP" pair container.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "EITP"
//! 4       2     version (u16) = 1
//! 6       1     endian flag (u8), 0 = little endian
//! 7       1     style (u8): 0 ACT4, 1 KIT4, 2 measured (truth NaN when unknown)
//! 8       4     rows (u32)
//! 12      4     cols (u32)
//! 16      8·N   truth   (f64, row-major)
//! ...     8·N   recon   (f64)
//! ...     8·N   imaginary part of m(z, 0) (f64)
//! ...     8     seed (u64)
//! ...     8     truncation radius R_n (f64)
//! ...     8     σ_b (f64)
//! ...     4     CRC32 of every preceding byte (u32)
//! ```
//!
//! All multi-byte fields are little endian; `N = rows·cols`.

use std::io::Write;
use std::path::Path;

use super::{Style, TrainingPair};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"EITP";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;
const META_LEN: usize = 24;

/// Exact byte length of a file holding `rows × cols` images.
pub fn encoded_len(rows: usize, cols: usize) -> usize {
    HEADER_LEN + 3 * 8 * rows * cols + META_LEN + 4
}

pub fn encode(pair: &TrainingPair) -> Vec<u8> {
    let (rows, cols) = (pair.n, pair.n);
    let mut out = Vec::with_capacity(encoded_len(rows, cols));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(0);
    out.push(pair.style.code());
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    for block in [&pair.truth, &pair.recon, &pair.m0_imag] {
        for v in block.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.extend_from_slice(&pair.seed.to_le_bytes());
    out.extend_from_slice(&pair.radius.to_le_bytes());
    out.extend_from_slice(&pair.sigma_b.to_le_bytes());
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

fn u64_at(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

/// Decodes a container; `path` only labels errors.
pub fn decode(bytes: &[u8], path: &Path) -> Result<TrainingPair> {
    let bad = |reason: String| Error::format(path, reason);
    if bytes.len() < HEADER_LEN + META_LEN + 4 {
        return Err(bad(format!("file too short ({} bytes)", bytes.len())));
    }
    if &bytes[0..4] != MAGIC {
        return Err(bad("bad magic, not an EITP file".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    if bytes[6] != 0 {
        return Err(bad(format!("endian flag {} is not little endian", bytes[6])));
    }
    let style = Style::from_code(bytes[7]).ok_or_else(|| bad(format!("unknown style code {}", bytes[7])))?;
    let rows = u32_at(bytes, 8) as usize;
    let cols = u32_at(bytes, 12) as usize;
    if rows != cols || rows == 0 {
        return Err(bad(format!("image must be square and non-empty, got {rows}x{cols}")));
    }
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(24))
        .map(|b| b + HEADER_LEN + META_LEN + 4);
    if expected != Some(bytes.len()) {
        return Err(bad(format!(
            "length {} does not match {rows}x{cols} images (checksum region truncated or padded)",
            bytes.len()
        )));
    }
    let body = bytes.len() - 4;
    let stored = u32_at(bytes, body);
    let actual = crc32fast::hash(&bytes[..body]);
    if stored != actual {
        return Err(bad(format!("checksum mismatch: stored {stored:08x}, computed {actual:08x}")));
    }
    let n = rows * cols;
    let block = |i: usize| -> Vec<f64> {
        let start = HEADER_LEN + i * 8 * n;
        (0..n).map(|j| f64::from_bits(u64_at(bytes, start + 8 * j))).collect()
    };
    let meta = HEADER_LEN + 24 * n;
    Ok(TrainingPair {
        style,
        n: rows,
        truth: block(0),
        recon: block(1),
        m0_imag: block(2),
        seed: u64_at(bytes, meta),
        radius: f64::from_bits(u64_at(bytes, meta + 8)),
        sigma_b: f64::from_bits(u64_at(bytes, meta + 16)),
    })
}

pub fn read_pair(path: &Path) -> Result<TrainingPair> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

/// Writes next to the target and renames, so readers never see a partial file.
pub fn write_pair(pair: &TrainingPair, path: &Path) -> Result<()> {
    pair.check()?;
    write_atomic(path, &encode(pair))
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Invalid(format!("{} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    let mut file = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(file);
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
