//! Per-pixel feature fields and the frozen linear maps that bring the
//! semantic features, the raw spectrum and its derivatives to a common width.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::cube::HsiCube;
use crate::error::{invalid, shape, Error, Result};
use crate::rng::SeededRng;

/// `N × C` feature rows in row-major pixel order (`N = height * width`).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    height: usize,
    width: usize,
    dim: usize,
    rows: Vec<f64>,
}

impl FeatureMap {
    pub fn new(height: usize, width: usize, dim: usize, rows: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || dim == 0 {
            return Err(invalid!("feature map dimensions must be ≥ 1"));
        }
        if rows.len() != height * width * dim {
            return Err(shape!(
                "feature map {height}x{width}x{dim} needs {} values, got {}",
                height * width * dim,
                rows.len()
            ));
        }
        if let Some(index) = rows.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { height, width, dim, rows })
    }

    /// Pixel spectra of a cube as rows (transposes BSQ to pixel-interleaved).
    pub fn from_cube(cube: &HsiCube) -> Self {
        let (n, d) = (cube.pixels(), cube.bands());
        let mut rows = vec![0.0; n * d];
        for b in 0..d {
            for (i, v) in cube.band(b).iter().enumerate() {
                rows[i * d + b] = *v;
            }
        }
        Self { height: cube.height(), width: cube.width(), dim: d, rows }
    }

    /// Band-sequential cube view, one band per channel, for writing to disk.
    pub fn to_cube(&self) -> Result<HsiCube> {
        let n = self.len();
        let mut data = vec![0.0; n * self.dim];
        for i in 0..n {
            for c in 0..self.dim {
                data[c * n + i] = self.rows[i * self.dim + c];
            }
        }
        HsiCube::new(self.height, self.width, self.dim, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of pixels.
    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[f64] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    /// Elementwise sum of feature maps with identical shape.
    pub fn sum(maps: &[&FeatureMap]) -> Result<FeatureMap> {
        let first = maps.first().ok_or_else(|| invalid!("cannot sum zero feature maps"))?;
        let mut rows = first.rows.clone();
        for m in &maps[1..] {
            if (m.height, m.width, m.dim) != (first.height, first.width, first.dim) {
                return Err(shape!(
                    "feature map {}x{}x{} does not match {}x{}x{}",
                    m.height,
                    m.width,
                    m.dim,
                    first.height,
                    first.width,
                    first.dim
                ));
            }
            for (r, v) in rows.iter_mut().zip(&m.rows) {
                *r += v;
            }
        }
        FeatureMap::new(first.height, first.width, first.dim, rows)
    }
}

/// Affine map `y = W x + b`, `W` stored row-major `out_dim × in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub seed: u64,
}

impl LinearMap {
    /// Glorot-uniform weights in `±sqrt(6 / (in + out))`, zero bias.
    pub fn init(in_dim: usize, out_dim: usize, seed: u64) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(invalid!("linear map dimensions must be ≥ 1"));
        }
        let mut rng = SeededRng::new(seed);
        let weights = glorot_uniform(&mut rng, in_dim, out_dim, in_dim * out_dim);
        Ok(Self { in_dim, out_dim, weights, bias: vec![0.0; out_dim], seed })
    }

    pub fn identity(dim: usize) -> Self {
        let mut weights = vec![0.0; dim * dim];
        for i in 0..dim {
            weights[i * dim + i] = 1.0;
        }
        Self { in_dim: dim, out_dim: dim, weights, bias: vec![0.0; dim], seed: 0 }
    }

    pub fn apply_row(&self, x: &[f64], out: &mut [f64]) {
        for (o, (w, b)) in out.iter_mut().zip(self.weights.chunks_exact(self.in_dim).zip(&self.bias)) {
            *o = w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + b;
        }
    }
}

pub(crate) fn glorot_uniform(rng: &mut SeededRng, fan_in: usize, fan_out: usize, count: usize) -> Vec<f64> {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..count).map(|_| rng.range(-a, a)).collect()
}

pub fn init_linear_map(in_dim: usize, out_dim: usize, seed: u64) -> Result<LinearMap> {
    LinearMap::init(in_dim, out_dim, seed)
}

/// Applies `map` to every pixel row.
pub fn project_features(input: &FeatureMap, map: &LinearMap) -> Result<FeatureMap> {
    if map.in_dim != input.dim {
        return Err(shape!("linear map expects {} input channels, features have {}", map.in_dim, input.dim));
    }
    let mut rows = vec![0.0; input.len() * map.out_dim];
    rows.par_chunks_mut(map.out_dim).enumerate().for_each(|(i, out)| map.apply_row(input.row(i), out));
    FeatureMap::new(input.height, input.width, map.out_dim, rows)
}

/// Built-in stand-ins for the semantic extraction network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderKind {
    /// Per-pixel linear map of the raw spectrum.
    Linear,
    /// 3×3 edge-clamped box average per band, then the per-pixel linear map.
    LocalAvg,
}

impl FromStr for ProviderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "local-avg" => Ok(Self::LocalAvg),
            other => Err(invalid!("unknown feature provider `{other}` (expected linear|local-avg)")),
        }
    }
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Linear => "linear",
            Self::LocalAvg => "local-avg",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub dim: usize,
    pub seed: u64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self { kind: ProviderKind::Linear, dim: 32, seed: 0 }
    }
}

/// Semantic feature field with the cube's spatial resolution.
pub fn semantic_features(cube: &HsiCube, cfg: &ProviderConfig) -> Result<FeatureMap> {
    let map = LinearMap::init(cube.bands(), cfg.dim, cfg.seed)?;
    semantic_features_with(cube, cfg.kind, &map)
}

/// Same as [`semantic_features`] with an explicit linear map.
pub fn semantic_features_with(cube: &HsiCube, kind: ProviderKind, map: &LinearMap) -> Result<FeatureMap> {
    let input = match kind {
        ProviderKind::Linear => FeatureMap::from_cube(cube),
        ProviderKind::LocalAvg => FeatureMap::from_cube(&box_average(cube)?),
    };
    project_features(&input, map)
}

/// 3×3 mean per band; out-of-image neighbors are dropped, so a corner
/// averages its 4 in-image neighbors.
pub fn box_average(cube: &HsiCube) -> Result<HsiCube> {
    let (h, w, n) = (cube.height(), cube.width(), cube.pixels());
    let mut data = vec![0.0; cube.data().len()];
    data.par_chunks_mut(n).enumerate().for_each(|(b, out)| {
        let band = cube.band(b);
        for y in 0..h {
            for x in 0..w {
                let (mut sum, mut count) = (0.0, 0usize);
                for yy in y.saturating_sub(1)..(y + 2).min(h) {
                    for xx in x.saturating_sub(1)..(x + 2).min(w) {
                        sum += band[yy * w + xx];
                        count += 1;
                    }
                }
                out[y * w + x] = sum / count as f64;
            }
        }
    });
    HsiCube::new(h, w, cube.bands(), data)
}
