//! Plain-text `.hdr` header plus a raw float32 little-endian BSQ sidecar.
//!
//! ```text
//! height = 64
//! width = 64
//! bands = 16
//! dtype = float32
//! interleave = bsq
//! byteorder = le
//! ```
//!
//! The sidecar lives next to the header with the extension replaced by
//! `.raw` and holds exactly `height * width * bands * 4` bytes.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::cube::HsiCube;
use crate::error::{Error, Result};

/// Sidecar path for a header path (`scene.hdr` → `scene.raw`).
pub fn data_path(header_path: &Path) -> PathBuf {
    header_path.with_extension("raw")
}

pub fn header_text(height: usize, width: usize, bands: usize) -> String {
    format!("height = {height}\nwidth = {width}\nbands = {bands}\ndtype = float32\ninterleave = bsq\nbyteorder = le\n")
}

pub fn write_cube(cube: &HsiCube, header_path: &Path) -> Result<()> {
    let header = header_text(cube.height(), cube.width(), cube.bands());
    fs::write(header_path, header).map_err(|e| Error::io(header_path, e))?;
    let mut bytes = Vec::with_capacity(cube.data().len() * 4);
    for v in cube.data() {
        bytes.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    let raw = data_path(header_path);
    fs::write(&raw, bytes).map_err(|e| Error::io(&raw, e))
}

pub fn read_cube(header_path: &Path) -> Result<HsiCube> {
    let text = fs::read_to_string(header_path).map_err(|e| Error::io(header_path, e))?;
    let header_err = |msg: String| Error::Header { path: header_path.to_path_buf(), msg };
    let keys = parse_header(&text).map_err(header_err)?;

    let dim = |key: &str| -> Result<usize> {
        let v = keys.get(key).ok_or_else(|| header_err(format!("missing key `{key}`")))?;
        let n: usize = v.parse().map_err(|_| header_err(format!("`{key}` is not an integer: {v:?}")))?;
        if n == 0 {
            return Err(header_err(format!("{key} must be ≥ 1")));
        }
        Ok(n)
    };
    let height = dim("height")?;
    let width = dim("width")?;
    let bands = dim("bands")?;
    for (key, want) in [("dtype", "float32"), ("interleave", "bsq"), ("byteorder", "le")] {
        match keys.get(key) {
            Some(v) if v.eq_ignore_ascii_case(want) => {}
            Some(v) => return Err(header_err(format!("unsupported {key} = {v}, expected {want}"))),
            None => return Err(header_err(format!("missing key `{key}`"))),
        }
    }

    let raw = data_path(header_path);
    let bytes = fs::read(&raw).map_err(|e| Error::io(&raw, e))?;
    let expected = (height * width * bands * 4) as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::SizeMismatch { path: raw, expected, actual: bytes.len() as u64 });
    }
    let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect();
    HsiCube::new(height, width, bands, data)
}

fn parse_header(text: &str) -> std::result::Result<HashMap<String, String>, String> {
    let mut keys = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.eq_ignore_ascii_case("ENVI") {
            continue;
        }
        let (k, v) =
            line.split_once('=').ok_or_else(|| format!("line {}: expected `key = value`, got {line:?}", lineno + 1))?;
        keys.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
    }
    Ok(keys)
}
