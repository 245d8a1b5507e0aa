//! Windowed pixel-to-center association and the center update.
//!
//! Entries store the squared distance `d²` rather than the weight; the weight
//! is `exp(-d²)`. Keeping `d²` lets the argmax and every ratio of weights be
//! evaluated after shifting by the smallest distance, so large distances that
//! underflow `exp` do not erase the ordering.

use rayon::prelude::*;

use super::{CentroidSet, ClusterConfig, Grid};
use crate::error::{invalid, shape, Result};
use crate::features::FeatureMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssocEntry {
    pub center: u32,
    pub sq_dist: f64,
}

impl AssocEntry {
    pub fn weight(&self) -> f64 {
        (-self.sq_dist).exp()
    }
}

/// Sparse `N × M_total` association matrix in compressed-row form. Row `i`
/// lists the centers in pixel `i`'s window in ascending center order.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociationMatrix {
    pub(crate) num_centers: usize,
    pub(crate) offsets: Vec<usize>,
    pub(crate) entries: Vec<AssocEntry>,
}

impl AssociationMatrix {
    /// Builds a matrix from explicit rows; each row must be non-empty.
    pub fn from_rows(num_centers: usize, rows: Vec<Vec<AssocEntry>>) -> Result<Self> {
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        offsets.push(0);
        let mut entries = Vec::new();
        for (i, mut row) in rows.into_iter().enumerate() {
            if row.is_empty() {
                return Err(invalid!("pixel {i} has no center in its window"));
            }
            if let Some(e) =
                row.iter().find(|e| e.center as usize >= num_centers || e.sq_dist.is_nan() || e.sq_dist < 0.0)
            {
                return Err(invalid!("pixel {i}: bad entry {e:?}"));
            }
            row.sort_by_key(|e| e.center);
            entries.extend(row);
            offsets.push(entries.len());
        }
        Ok(Self { num_centers, offsets, entries })
    }

    pub fn num_pixels(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_centers(&self) -> usize {
        self.num_centers
    }

    pub fn row(&self, i: usize) -> &[AssocEntry] {
        &self.entries[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// `A(i, j)`, zero outside the window.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.row(i).iter().find(|e| e.center as usize == j).map_or(0.0, AssocEntry::weight)
    }

    /// Entry of the pixel's strongest center; ties go to the lower index.
    pub fn best(&self, i: usize) -> AssocEntry {
        let row = self.row(i);
        let mut best = row[0];
        for e in &row[1..] {
            if e.sq_dist < best.sq_dist {
                best = *e;
            }
        }
        best
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.num_pixels())
            .map(|i| {
                let mut r = vec![0.0; self.num_centers];
                for e in self.row(i) {
                    r[e.center as usize] = e.weight();
                }
                r
            })
            .collect()
    }

    /// Pixel lists per center (ascending pixel index) with their distances.
    pub fn columns(&self) -> Vec<Vec<(usize, f64)>> {
        let mut cols = vec![Vec::new(); self.num_centers];
        for i in 0..self.num_pixels() {
            for e in self.row(i) {
                cols[e.center as usize].push((i, e.sq_dist));
            }
        }
        cols
    }
}

/// Window lists: for every grid cell, the centers whose home cell is within
/// Chebyshev distance `radius`.
pub fn window_centers(grid: &Grid, per_cell: usize, radius: usize) -> Vec<Vec<u32>> {
    (0..grid.num_cells())
        .map(|cell| {
            grid.neighborhood(cell, radius)
                .into_iter()
                .flat_map(|c| (c * per_cell..(c + 1) * per_cell).map(|j| j as u32))
                .collect()
        })
        .collect()
}

/// `A(i, j) = exp(-‖q_i - P_j‖²)` for centers `j` in pixel `i`'s window,
/// where `q` is the association query (semantic plus spectral terms).
pub fn compute_associations(
    query: &FeatureMap,
    centers: &CentroidSet,
    cfg: &ClusterConfig,
) -> Result<AssociationMatrix> {
    if query.dim() != centers.dim {
        return Err(shape!("association query has {} channels, centers have {}", query.dim(), centers.dim));
    }
    if centers.grid != cfg.grid || centers.per_cell != cfg.per_cell {
        return Err(invalid!("centroid set was seeded with a different grid configuration"));
    }
    let grid = Grid::new(query.height(), query.width(), cfg.grid)?;
    let windows = window_centers(&grid, cfg.per_cell, cfg.window);
    if let Some(cell) = windows.iter().position(Vec::is_empty) {
        return Err(invalid!("cell {cell} has an empty center window"));
    }
    let dim = query.dim();
    let rows: Vec<Vec<AssocEntry>> = (0..query.len())
        .into_par_iter()
        .map(|i| {
            let q = query.row(i);
            windows[grid.cell_index(i)]
                .iter()
                .map(|&j| {
                    let p = &centers.features[j as usize * dim..(j as usize + 1) * dim];
                    let sq_dist = q.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum();
                    AssocEntry { center: j, sq_dist }
                })
                .collect()
        })
        .collect();
    AssociationMatrix::from_rows(centers.count(), rows)
}

/// Column-normalized weighted mean of the semantic features per center.
///
/// Column `j` is normalized as `exp(-(d²_ij - m_j)) / Σ_k exp(-(d²_kj - m_j))`
/// with `m_j` the column's smallest distance; this equals `A(ij) / Σ_k A(kj)`
/// whenever the unshifted sum is representable. Centers with no pixel in
/// their window keep their previous feature. Accumulation runs in ascending
/// pixel order per center.
pub fn update_centers(assoc: &AssociationMatrix, semantic: &FeatureMap, previous: &CentroidSet) -> Result<CentroidSet> {
    if assoc.num_pixels() != semantic.len() {
        return Err(shape!("association has {} rows, features have {} pixels", assoc.num_pixels(), semantic.len()));
    }
    if semantic.dim() != previous.dim || assoc.num_centers() != previous.count() {
        return Err(shape!("center set does not match features or associations"));
    }
    let dim = semantic.dim();
    let columns = assoc.columns();
    let features: Vec<f64> = columns
        .par_iter()
        .enumerate()
        .flat_map_iter(|(j, col)| {
            if col.is_empty() {
                return previous.feature(j).to_vec().into_iter();
            }
            let shift = col.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
            let mut acc = vec![0.0; dim];
            let mut total = 0.0;
            for &(i, d2) in col {
                let w = (shift - d2).exp();
                total += w;
                for (a, f) in acc.iter_mut().zip(semantic.row(i)) {
                    *a += w * f;
                }
            }
            acc.iter_mut().for_each(|a| *a /= total);
            acc.into_iter()
        })
        .collect();
    Ok(CentroidSet { features, ..previous.clone() })
}
