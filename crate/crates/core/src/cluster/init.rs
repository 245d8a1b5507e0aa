//! Centroid seeding: `M` anchors per grid cell, each centroid the mean
//! semantic feature of the anchor's `k` nearest pixels.

use rayon::prelude::*;

use super::{Anchor, CentroidSet, ClusterConfig, Grid};
use crate::error::{invalid, Result};
use crate::features::FeatureMap;
use crate::rng::SeededRng;

/// Anchor positions for every cell, cell-major then slot order.
///
/// Each cell is split into a `s × s` sub-lattice with `s = ceil(sqrt(M))`;
/// anchor `m` sits in sub-cell `(m / s, m % s)`, at its center or, with
/// `jitter`, at a uniformly drawn pixel of that sub-cell.
pub fn place_anchors(grid: &Grid, per_cell: usize, jitter: Option<u64>) -> Result<Vec<Anchor>> {
    if per_cell == 0 {
        return Err(invalid!("centroids per cell must be ≥ 1"));
    }
    let side = (1..).find(|s| s * s >= per_cell).unwrap_or(1);
    let mut rng = jitter.map(SeededRng::new);
    let f = grid.cells_per_side();
    let mut anchors = Vec::with_capacity(grid.num_cells() * per_cell);
    for cr in 0..f {
        let (y0, y1) = grid.row_span(cr);
        for cc in 0..f {
            let (x0, x1) = grid.col_span(cc);
            let (ch, cw) = (y1 - y0, x1 - x0);
            if ch < side || cw < side {
                return Err(invalid!(
                    "cell ({cr},{cc}) is {ch}x{cw} pixels, smaller than the {side}x{side} anchor sub-lattice"
                ));
            }
            for m in 0..per_cell {
                let (a, b) = (m / side, m % side);
                let (y, x) = match rng.as_mut() {
                    None => (y0 + (2 * a + 1) * ch / (2 * side), x0 + (2 * b + 1) * cw / (2 * side)),
                    Some(rng) => {
                        let (sy0, sy1) = (a * ch / side, (a + 1) * ch / side);
                        let (sx0, sx1) = (b * cw / side, (b + 1) * cw / side);
                        (y0 + sy0 + rng.below(sy1 - sy0), x0 + sx0 + rng.below(sx1 - sx0))
                    }
                };
                anchors.push(Anchor { cell_row: cr, cell_col: cc, y, x });
            }
        }
    }
    Ok(anchors)
}

/// Indices of the `k` pixels nearest to `(y, x)` by Euclidean pixel
/// distance, ties broken by row-major index.
pub fn nearest_pixels(height: usize, width: usize, y: usize, x: usize, k: usize) -> Vec<usize> {
    let k = k.min(height * width);
    // smallest square radius holding k pixels; the k-th nearest lies within r·√2
    let mut r = 0usize;
    loop {
        let rows = (y + r + 1).min(height) - y.saturating_sub(r);
        let cols = (x + r + 1).min(width) - x.saturating_sub(r);
        if rows * cols >= k {
            break;
        }
        r += 1;
    }
    let reach = ((r as f64) * std::f64::consts::SQRT_2).ceil() as usize;
    let mut candidates = Vec::new();
    for yy in y.saturating_sub(reach)..(y + reach + 1).min(height) {
        for xx in x.saturating_sub(reach)..(x + reach + 1).min(width) {
            let dy = yy as i64 - y as i64;
            let dx = xx as i64 - x as i64;
            candidates.push((dy * dy + dx * dx, yy * width + xx));
        }
    }
    candidates.sort_unstable();
    candidates.truncate(k);
    candidates.into_iter().map(|(_, i)| i).collect()
}

pub fn init_centroids(semantic: &FeatureMap, cfg: &ClusterConfig) -> Result<CentroidSet> {
    cfg.validate()?;
    let n = semantic.len();
    if cfg.knn > n {
        return Err(invalid!("knn {} exceeds pixel count {n}", cfg.knn));
    }
    let grid = Grid::new(semantic.height(), semantic.width(), cfg.grid)?;
    let anchors = place_anchors(&grid, cfg.per_cell, cfg.jitter)?;
    let dim = semantic.dim();
    let features: Vec<f64> = anchors
        .par_iter()
        .flat_map_iter(|a| {
            let near = nearest_pixels(semantic.height(), semantic.width(), a.y, a.x, cfg.knn);
            let mut mean = vec![0.0; dim];
            for &i in &near {
                for (m, v) in mean.iter_mut().zip(semantic.row(i)) {
                    *m += v;
                }
            }
            let inv = 1.0 / near.len() as f64;
            mean.into_iter().map(move |v| v * inv)
        })
        .collect();
    Ok(CentroidSet { grid: cfg.grid, per_cell: cfg.per_cell, dim, features, anchors })
}
