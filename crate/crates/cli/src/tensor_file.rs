//! Binary tensor format:
//!
//! ```text
//! offset  size      field
//! 0       4         magic "HSRT"
//! 4       1         version = 1
//! 5       3 × 8     I, J, K  (u64, little endian)
//! 29      8·I·J·K   f64 little endian, i fastest, then j, then k
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use hsr_btd::Tensor3;

use crate::error::{CliError, CliResult};

pub const MAGIC: &[u8; 4] = b"HSRT";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 29;

pub fn encode(t: &Tensor3<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * t.len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    for d in t.dims() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Tensor3<f64>, String> {
    if bytes.len() < HEADER_LEN {
        return Err(format!(
            "file is {} bytes, shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        ));
    }
    if &bytes[..4] != MAGIC {
        return Err("not a tensor file (bad magic)".into());
    }
    if bytes[4] != VERSION {
        return Err(format!("unsupported tensor file version {}", bytes[4]));
    }
    let mut dims = [0usize; 3];
    for (n, d) in dims.iter_mut().enumerate() {
        let raw = u64::from_le_bytes(bytes[5 + 8 * n..13 + 8 * n].try_into().unwrap());
        *d = usize::try_from(raw).map_err(|_| format!("dimension {raw} is too large"))?;
    }
    let len = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .and_then(|n| n.checked_mul(8))
        .ok_or("dimensions overflow")?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != len {
        return Err(format!(
            "payload is {} bytes, dims {dims:?} need {len}",
            payload.len()
        ));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Tensor3::from_vec(dims, data).map_err(|e| e.to_string())
}

pub fn read_tensor(path: &Path) -> CliResult<Tensor3<f64>> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode(&bytes).map_err(|e| CliError::io(path, e))
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file()
        .sync_all()
        .map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn write_tensor(path: &Path, t: &Tensor3<f64>) -> CliResult<()> {
    write_atomic(path, &encode(t))
}
