use std::fs;
use std::path::Path;

use crate::error::{invalid, Error, Result};

/// One RGB triple per class. Text form: lines `class r g b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Palette {
    colors: Vec<[u8; 3]>,
}

impl Palette {
    pub fn new(colors: Vec<[u8; 3]>) -> Self {
        Self { colors }
    }

    /// Evenly spaced hues at full saturation.
    pub fn generate(num_classes: usize) -> Self {
        let colors = (0..num_classes)
            .map(|c| {
                let h = c as f64 / num_classes.max(1) as f64 * 6.0;
                let x = 1.0 - (h % 2.0 - 1.0).abs();
                let (r, g, b) = match h as usize {
                    0 => (1.0, x, 0.0),
                    1 => (x, 1.0, 0.0),
                    2 => (0.0, 1.0, x),
                    3 => (0.0, x, 1.0),
                    4 => (x, 0.0, 1.0),
                    _ => (1.0, 0.0, x),
                };
                let q = |v: f64| (v * 255.0).round() as u8;
                [q(r), q(g), q(b)]
            })
            .collect();
        Self { colors }
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    pub fn color(&self, class: u16) -> Result<[u8; 3]> {
        self.colors.get(class as usize).copied().ok_or_else(|| invalid!("palette has no color for class {class}"))
    }

    pub fn to_text(&self) -> String {
        self.colors.iter().enumerate().map(|(c, [r, g, b])| format!("{c} {r} {g} {b}\n")).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<(usize, [u8; 3])> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parsed: Option<(usize, [u8; 3])> = match fields.as_slice() {
                [c, r, g, b] => (|| Some((c.parse().ok()?, [r.parse().ok()?, g.parse().ok()?, b.parse().ok()?])))(),
                _ => None,
            };
            let entry = parsed.ok_or_else(|| {
                Error::Format(format!("palette line {}: expected `class r g b`, got {line:?}", lineno + 1))
            })?;
            entries.push(entry);
        }
        entries.sort_by_key(|e| e.0);
        for (expected, (c, _)) in entries.iter().enumerate() {
            if *c != expected {
                return Err(Error::Format(format!("palette is missing class {expected}")));
            }
        }
        Ok(Self { colors: entries.into_iter().map(|e| e.1).collect() })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}
