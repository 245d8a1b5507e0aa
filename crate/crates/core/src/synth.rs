//! Deterministic synthetic scenes: a rectangular patchwork of classes, each
//! pixel drawn as its class-mean spectrum plus i.i.d. Gaussian noise.

use crate::cube::{HsiCube, LabelMap};
use crate::error::{invalid, shape, Result};
use crate::rng::SeededRng;

/// Axis-aligned rectangle `[y0, y0+height) × [x0, x0+width)` of one class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub y0: usize,
    pub x0: usize,
    pub height: usize,
    pub width: usize,
    pub class: u16,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub num_classes: usize,
    /// Mean spectrum per class, `num_classes × bands`.
    pub class_spectra: Vec<Vec<f64>>,
    pub noise_sigma: f64,
    /// Later regions paint over earlier ones; together they must cover the image.
    pub regions: Vec<Region>,
    pub seed: u64,
}

/// Four equal quadrants, classes assigned in reading order.
pub fn quadrants(height: usize, width: usize, classes: [u16; 4]) -> Vec<Region> {
    grid_layout(height, width, 2, 2, &classes)
}

/// `rows × cols` blocks (balanced split); block `r*cols + c` gets
/// `classes[(r*cols + c) % classes.len()]`.
pub fn grid_layout(height: usize, width: usize, rows: usize, cols: usize, classes: &[u16]) -> Vec<Region> {
    let mut regions = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let (y0, y1) = (r * height / rows, (r + 1) * height / rows);
        for c in 0..cols {
            let (x0, x1) = (c * width / cols, (c + 1) * width / cols);
            regions.push(Region {
                y0,
                x0,
                height: y1 - y0,
                width: x1 - x0,
                class: classes[(r * cols + c) % classes.len()],
            });
        }
    }
    regions
}

/// Smooth random spectra in `[0, 1]` whose pairwise L2 distances are all at
/// least `min_distance`. Values are rounded to float32 so they survive a
/// write/read cycle unchanged.
pub fn separated_spectra(num_classes: usize, bands: usize, min_distance: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut rng = SeededRng::new(seed);
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(num_classes);
    let mut attempts = 0;
    while out.len() < num_classes {
        attempts += 1;
        if attempts > 10_000 {
            return Err(invalid!("cannot place {num_classes} spectra of {bands} bands at distance ≥ {min_distance}"));
        }
        let base = rng.range(0.1, 0.5);
        let bumps: Vec<(f64, f64, f64)> =
            (0..3).map(|_| (rng.range(0.0, bands as f64), rng.range(1.0, 4.0), rng.range(-0.4, 0.5))).collect();
        let candidate: Vec<f64> = (0..bands)
            .map(|b| {
                let v = bumps.iter().fold(base, |acc, &(center, width, amp)| {
                    acc + amp * (-((b as f64 - center) / width).powi(2)).exp()
                });
                v.clamp(0.0, 1.0) as f32 as f64
            })
            .collect();
        let far = out
            .iter()
            .all(|s| s.iter().zip(&candidate).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() >= min_distance);
        if far {
            out.push(candidate);
        }
    }
    Ok(out)
}

impl SceneSpec {
    /// Square scene tiled into `ceil(sqrt(classes))²` blocks with cyclic
    /// class ids and spectra at pairwise distance ≥ `min_distance`. Spectra
    /// come from `seed`; noise uses `seed + 1`.
    pub fn separated(
        size: usize,
        bands: usize,
        classes: usize,
        noise_sigma: f64,
        min_distance: f64,
        seed: u64,
    ) -> Result<Self> {
        let blocks = (1..).find(|b| b * b >= classes).unwrap_or(1);
        let ids: Vec<u16> = (0..classes as u16).collect();
        if ids.is_empty() {
            return Err(invalid!("num_classes must be ≥ 1"));
        }
        Ok(Self {
            height: size,
            width: size,
            bands,
            num_classes: classes,
            class_spectra: separated_spectra(classes, bands, min_distance, seed)?,
            noise_sigma,
            regions: grid_layout(size, size, blocks, blocks, &ids),
            seed: seed.wrapping_add(1),
        })
    }

    fn validate(&self) -> Result<()> {
        if self.num_classes == 0 {
            return Err(invalid!("num_classes must be ≥ 1"));
        }
        if self.noise_sigma.is_nan() || self.noise_sigma < 0.0 {
            return Err(invalid!("noise_sigma must be ≥ 0"));
        }
        if self.height == 0 || self.width == 0 || self.bands == 0 {
            return Err(invalid!("scene dimensions must be ≥ 1"));
        }
        if self.class_spectra.len() != self.num_classes {
            return Err(shape!("{} class spectra for {} classes", self.class_spectra.len(), self.num_classes));
        }
        if let Some(s) = self.class_spectra.iter().find(|s| s.len() != self.bands) {
            return Err(shape!("class spectrum has {} bands, expected {}", s.len(), self.bands));
        }
        for r in &self.regions {
            if r.y0 + r.height > self.height || r.x0 + r.width > self.width {
                return Err(invalid!("region {r:?} exceeds the image"));
            }
            if r.class as usize >= self.num_classes {
                return Err(invalid!("region {r:?} uses class ≥ {}", self.num_classes));
            }
        }
        Ok(())
    }
}

/// Renders the scene. Noise is drawn band-major (band 0 for every pixel in
/// row-major order, then band 1, ...) from [`SeededRng`] seeded with `spec.seed`.
pub fn make_synthetic_scene(spec: &SceneSpec) -> Result<(HsiCube, LabelMap)> {
    spec.validate()?;
    let (h, w) = (spec.height, spec.width);
    let n = h * w;
    let mut ids: Vec<Option<u16>> = vec![None; n];
    for r in &spec.regions {
        for y in r.y0..r.y0 + r.height {
            for x in r.x0..r.x0 + r.width {
                ids[y * w + x] = Some(r.class);
            }
        }
    }
    let ids = ids
        .into_iter()
        .enumerate()
        .map(|(i, c)| c.ok_or_else(|| invalid!("region layout does not cover pixel ({}, {})", i / w, i % w)))
        .collect::<Result<Vec<u16>>>()?;

    let mut rng = SeededRng::new(spec.seed);
    let mut data = Vec::with_capacity(n * spec.bands);
    for b in 0..spec.bands {
        for &c in &ids {
            let mean = spec.class_spectra[c as usize][b];
            let v = if spec.noise_sigma > 0.0 { mean + spec.noise_sigma * rng.normal() } else { mean };
            data.push(v as f32 as f64);
        }
    }
    Ok((HsiCube::new(h, w, spec.bands, data)?, LabelMap::new(h, w, ids)?))
}
