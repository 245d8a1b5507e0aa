//! Binary netpbm: 16-bit P5 for label/class maps, 8-bit P6 for colorized maps.

use std::fs;
use std::path::Path;

use crate::cluster::AssignmentMap;
use crate::cube::{ClassMap, LabelMap};
use crate::error::{invalid, Error, Result};
use crate::io::palette::Palette;

pub fn encode_pgm16(height: usize, width: usize, samples: &[u16]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    out.reserve(samples.len() * 2);
    for s in samples {
        out.extend_from_slice(&s.to_be_bytes());
    }
    out
}

/// Parses a 16-bit binary PGM into `(height, width, samples)`.
pub fn decode_pgm16(bytes: &[u8]) -> Result<(usize, usize, Vec<u16>)> {
    let mut cursor = HeaderCursor { bytes, pos: 0 };
    let magic = cursor.token()?;
    if magic != "P5" {
        return Err(Error::Format(format!("expected binary PGM (P5), found {magic:?}")));
    }
    let width = cursor.number("width")?;
    let height = cursor.number("height")?;
    let maxval = cursor.number("maxval")?;
    if maxval != 65535 {
        return Err(Error::Format(format!("expected 16-bit label map (maxval 65535), found maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    let start = cursor.pos + 1;
    let needed = width * height * 2;
    let body = bytes.get(start..).unwrap_or(&[]);
    if body.len() != needed {
        return Err(Error::Format(format!(
            "PGM raster holds {} bytes, expected {needed} for {width}x{height}",
            body.len()
        )));
    }
    let samples = body.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
    Ok((height, width, samples))
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn token(&mut self) -> Result<String> {
        loop {
            match self.bytes.get(self.pos) {
                Some(b'#') => {
                    while self.bytes.get(self.pos).is_some_and(|&b| b != b'\n') {
                        self.pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(_) => break,
                None => return Err(Error::Format("truncated netpbm header".into())),
            }
        }
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(|b| !b.is_ascii_whitespace()) {
            self.pos += 1;
        }
        Ok(String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned())
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let tok = self.token()?;
        tok.parse().map_err(|_| Error::Format(format!("netpbm {what} is not a number: {tok:?}")))
    }
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_pgm16(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm16(&bytes)
}

pub fn write_label_map(map: &LabelMap, path: &Path) -> Result<()> {
    write_bytes(path, &encode_pgm16(map.height(), map.width(), map.ids()))
}

pub fn read_label_map(path: &Path) -> Result<LabelMap> {
    let (h, w, ids) = read_pgm16(path)?;
    LabelMap::new(h, w, ids)
}

/// Reads a label map and checks it against the expected raster size.
pub fn read_label_map_expect(path: &Path, height: usize, width: usize) -> Result<LabelMap> {
    let map = read_label_map(path)?;
    map.check_dims(height, width)?;
    Ok(map)
}

pub fn write_class_map(map: &ClassMap, path: &Path) -> Result<()> {
    write_bytes(path, &encode_pgm16(map.height(), map.width(), map.ids()))
}

pub fn read_class_map(path: &Path) -> Result<ClassMap> {
    let (h, w, ids) = read_pgm16(path)?;
    ClassMap::new(h, w, ids)
}

/// Center indices as 16-bit samples; needs fewer than 65536 centers.
pub fn write_assignment(map: &AssignmentMap, path: &Path) -> Result<()> {
    if map.num_centers() > u16::MAX as usize {
        return Err(invalid!("{} centers do not fit a 16-bit assignment map", map.num_centers()));
    }
    let ids: Vec<u16> = map.ids().iter().map(|&j| j as u16).collect();
    write_bytes(path, &encode_pgm16(map.height(), map.width(), &ids))
}

pub fn read_assignment(path: &Path, num_centers: usize) -> Result<AssignmentMap> {
    let (h, w, ids) = read_pgm16(path)?;
    AssignmentMap::new(h, w, num_centers, ids.into_iter().map(u32::from).collect())
}

pub fn encode_ppm(map: &ClassMap, palette: &Palette) -> Result<Vec<u8>> {
    let mut out = format!("P6\n{} {}\n255\n", map.width(), map.height()).into_bytes();
    for &c in map.ids() {
        out.extend_from_slice(&palette.color(c)?);
    }
    Ok(out)
}

pub fn write_class_map_ppm(map: &ClassMap, palette: &Palette, path: &Path) -> Result<()> {
    write_bytes(path, &encode_ppm(map, palette)?)
}
