//! Checkpoint format: a text header terminated by a line `end`, followed by
//! every tensor as float32 little-endian in layout order.
//!
//! ```text
//! supertoken-checkpoint v1
//! dim = 32
//! heads = 4
//! blocks = 2
//! classes = 5
//! mlp_ratio = 4
//! seed = 7
//! end
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::{ClassifierParams, ModelConfig};
use crate::error::{Error, Result};

const MAGIC: &str = "supertoken-checkpoint v1";

pub fn encode_checkpoint(params: &ClassifierParams) -> Vec<u8> {
    let c = &params.config;
    let mut out = format!(
        "{MAGIC}\ndim = {}\nheads = {}\nblocks = {}\nclasses = {}\nmlp_ratio = {}\nseed = {}\nend\n",
        c.dim, c.heads, c.blocks, c.classes, c.mlp_ratio, params.seed
    )
    .into_bytes();
    for v in &params.values {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ClassifierParams> {
    let bad = |msg: String| Error::Format(format!("checkpoint: {msg}"));
    let mut pos = 0;
    let mut next_line = || -> Result<String> {
        let rest = &bytes[pos..];
        let end = rest.iter().position(|&b| b == b'\n').ok_or_else(|| bad("truncated header".into()))?;
        pos += end + 1;
        Ok(String::from_utf8_lossy(&rest[..end]).trim().to_string())
    };
    if next_line()? != MAGIC {
        return Err(bad("missing magic line".into()));
    }
    let mut keys = HashMap::new();
    loop {
        let line = next_line()?;
        if line == "end" {
            break;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("bad header line {line:?}")))?;
        keys.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get = |k: &str| -> Result<u64> {
        keys.get(k)
            .ok_or_else(|| bad(format!("missing key `{k}`")))?
            .parse()
            .map_err(|_| bad(format!("`{k}` is not an integer")))
    };
    let config = ModelConfig {
        dim: get("dim")? as usize,
        heads: get("heads")? as usize,
        blocks: get("blocks")? as usize,
        classes: get("classes")? as usize,
        mlp_ratio: get("mlp_ratio")? as usize,
    };
    let seed = get("seed")?;
    let body = &bytes[pos..];
    if !body.len().is_multiple_of(4) {
        return Err(bad(format!("tensor payload of {} bytes is not float32-aligned", body.len())));
    }
    let values = body.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect();
    ClassifierParams::from_values(config, seed, values)
}

pub fn write_checkpoint(params: &ClassifierParams, path: &Path) -> Result<()> {
    fs::write(path, encode_checkpoint(params)).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<ClassifierParams> {
    decode_checkpoint(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_rounds_to_f32() {
        let p = ClassifierParams::init(ModelConfig::new(8, 3), 4).unwrap();
        let back = decode_checkpoint(&encode_checkpoint(&p)).unwrap();
        assert_eq!(back.config, p.config);
        assert_eq!(back.seed, 4);
        for (a, b) in back.values.iter().zip(&p.values) {
            assert_eq!(*a, *b as f32 as f64);
        }
        // a second cycle is lossless
        assert_eq!(decode_checkpoint(&encode_checkpoint(&back)).unwrap(), back);
    }

    #[test]
    fn truncated_payload() {
        let p = ClassifierParams::init(ModelConfig::new(8, 3), 4).unwrap();
        let bytes = encode_checkpoint(&p);
        assert!(decode_checkpoint(&bytes[..bytes.len() - 4]).is_err());
        assert!(decode_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_checkpoint(b"nonsense\n").is_err());
    }
}
