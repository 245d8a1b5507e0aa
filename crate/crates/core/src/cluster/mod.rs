//! Stage one: group spectrally similar pixels into supertokens.
//!
//! Centers are seeded on a grid over the semantic feature field, refined by
//! `T` rounds of windowed soft association and column-normalized updates,
//! and every pixel is finally assigned to its strongest center. The token of
//! a center is the association-weighted blend of the center and its pixels.

mod aggregate;
mod assoc;
mod grid;
mod init;

pub use aggregate::{aggregate_tokens, SupertokenSet};
pub use assoc::{compute_associations, update_centers, window_centers, AssocEntry, AssociationMatrix};
pub use grid::Grid;
pub use init::{init_centroids, nearest_pixels, place_anchors};

use crate::error::{invalid, shape, Result};
use crate::features::FeatureMap;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterConfig {
    /// Grid cells per image side (`F`).
    pub grid: usize,
    /// Centroids per grid cell (`M`).
    pub per_cell: usize,
    /// Association/update rounds (`T`).
    pub iterations: usize,
    /// Neighbors averaged when seeding a centroid.
    pub knn: usize,
    /// Window radius in grid cells (Chebyshev).
    pub window: usize,
    /// Seed for randomized anchor placement; `None` uses the fixed lattice.
    pub jitter: Option<u64>,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self { grid: 16, per_cell: 4, iterations: 4, knn: 9, window: 1, jitter: None }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid == 0 || self.per_cell == 0 || self.iterations == 0 || self.knn == 0 {
            return Err(invalid!("cluster grid, per-cell, iterations and knn must all be ≥ 1 (got {self:?})"));
        }
        Ok(())
    }

    pub fn num_centers(&self) -> usize {
        self.grid * self.grid * self.per_cell
    }
}

/// Initial sampling point of a center.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Anchor {
    pub cell_row: usize,
    pub cell_col: usize,
    pub y: usize,
    pub x: usize,
}

/// `F²·M` center features; center `j` belongs to grid cell `j / M`.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidSet {
    pub grid: usize,
    pub per_cell: usize,
    pub dim: usize,
    pub features: Vec<f64>,
    pub anchors: Vec<Anchor>,
}

impl CentroidSet {
    pub fn count(&self) -> usize {
        self.grid * self.grid * self.per_cell
    }

    pub fn feature(&self, j: usize) -> &[f64] {
        &self.features[j * self.dim..(j + 1) * self.dim]
    }

    pub fn home_cell(&self, j: usize) -> usize {
        j / self.per_cell
    }
}

/// Hard assignment of every pixel to one center.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentMap {
    height: usize,
    width: usize,
    num_centers: usize,
    ids: Vec<u32>,
}

impl AssignmentMap {
    pub fn new(height: usize, width: usize, num_centers: usize, ids: Vec<u32>) -> Result<Self> {
        if ids.len() != height * width {
            return Err(shape!("assignment has {} entries for {height}x{width}", ids.len()));
        }
        if let Some(&j) = ids.iter().find(|&&j| j as usize >= num_centers) {
            return Err(invalid!("assignment refers to center {j} ≥ {num_centers}"));
        }
        Ok(Self { height, width, num_centers, ids })
    }

    /// Argmax of each association row, ties to the lower center index.
    pub fn from_associations(assoc: &AssociationMatrix, height: usize, width: usize) -> Result<Self> {
        let ids = (0..assoc.num_pixels()).map(|i| assoc.best(i).center).collect();
        Self::new(height, width, assoc.num_centers(), ids)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn num_centers(&self) -> usize {
        self.num_centers
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    /// Member pixels of each center, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.num_centers];
        for (i, &j) in self.ids.iter().enumerate() {
            m[j as usize].push(i);
        }
        m
    }
}

/// Semantic features plus the spectral terms added to them when measuring
/// a pixel against the centers (projected spectrum and first derivative by
/// default). All maps share the same width.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterInputs {
    pub semantic: FeatureMap,
    pub spectral: Vec<FeatureMap>,
}

impl ClusterInputs {
    /// `F_D(i) + Σ spectral_t(i)` per pixel.
    pub fn query(&self) -> Result<FeatureMap> {
        let mut maps = vec![&self.semantic];
        maps.extend(self.spectral.iter());
        FeatureMap::sum(&maps)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    pub associations: AssociationMatrix,
    pub centers: CentroidSet,
    pub assignment: AssignmentMap,
}

/// Seeds centers, runs `T` association/update rounds, recomputes the
/// associations against the final centers and assigns every pixel.
pub fn cluster(inputs: &ClusterInputs, cfg: &ClusterConfig) -> Result<ClusterResult> {
    let semantic = &inputs.semantic;
    let query = inputs.query()?;
    let mut centers = init_centroids(semantic, cfg)?;
    for _ in 0..cfg.iterations {
        let assoc = compute_associations(&query, &centers, cfg)?;
        centers = update_centers(&assoc, semantic, &centers)?;
    }
    let associations = compute_associations(&query, &centers, cfg)?;
    let assignment = AssignmentMap::from_associations(&associations, semantic.height(), semantic.width())?;
    Ok(ClusterResult { associations, centers, assignment })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fmap(h: usize, w: usize, dim: usize, f: impl Fn(usize, usize) -> f64) -> FeatureMap {
        let rows = (0..h * w * dim).map(|k| f(k / dim, k % dim)).collect();
        FeatureMap::new(h, w, dim, rows).unwrap()
    }

    fn cfg(grid: usize, per_cell: usize) -> ClusterConfig {
        ClusterConfig { grid, per_cell, iterations: 2, knn: 1, window: 1, jitter: None }
    }

    #[test]
    fn k1_centroids_are_sampled_points() {
        let fd = fmap(4, 4, 2, |i, c| (i * 10 + c) as f64);
        let p = init_centroids(&fd, &cfg(2, 1)).unwrap();
        assert_eq!(p.count(), 4);
        let expected = [5usize, 7, 13, 15];
        for (j, &i) in expected.iter().enumerate() {
            assert_eq!(p.feature(j), fd.row(i));
        }
    }

    #[test]
    fn constant_features_give_constant_centroids() {
        let fd = fmap(9, 9, 3, |_, c| c as f64 - 0.5);
        let mut c = cfg(3, 4);
        c.knn = 9;
        let p = init_centroids(&fd, &c).unwrap();
        for j in 0..p.count() {
            assert_eq!(p.feature(j), &[-0.5, 0.5, 1.5]);
        }
    }

    #[test]
    fn default_grid_gives_1024_tokens() {
        let fd = fmap(32, 32, 2, |i, c| ((i * 7 + c * 3) % 11) as f64 * 0.1);
        let p = init_centroids(&fd, &ClusterConfig::default()).unwrap();
        assert_eq!(p.count(), 1024);
        assert_eq!(p.features.len(), 1024 * 2);
    }

    #[test]
    fn zero_distance_weight_is_one() {
        let e = AssocEntry { center: 0, sq_dist: 0.0 };
        assert_eq!(e.weight(), 1.0);
        let e = AssocEntry { center: 0, sq_dist: 1.0 };
        assert!((e.weight() - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn update_example() {
        // one center, two pixels with weights 0.2 and 0.6
        let fd = FeatureMap::new(1, 2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let rows = vec![
            vec![AssocEntry { center: 0, sq_dist: -(0.2f64.ln()) }],
            vec![AssocEntry { center: 0, sq_dist: -(0.6f64.ln()) }],
        ];
        let a = AssociationMatrix::from_rows(1, rows).unwrap();
        let prev = CentroidSet { grid: 1, per_cell: 1, dim: 2, features: vec![9.0, 9.0], anchors: vec![] };
        let p = update_centers(&a, &fd, &prev).unwrap();
        assert!((p.features[0] - 0.25).abs() < 1e-12);
        assert!((p.features[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn identical_features_fix_centers() {
        let fd = fmap(6, 6, 2, |_, c| [0.3, -0.7][c]);
        let inputs =
            ClusterInputs { semantic: fd.clone(), spectral: vec![fmap(6, 6, 2, |i, c| (i + c) as f64 * 0.01)] };
        let r = cluster(&inputs, &cfg(3, 1)).unwrap();
        for j in 0..r.centers.count() {
            for (a, b) in r.centers.feature(j).iter().zip([0.3, -0.7]) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn single_iteration_is_composition() {
        let fd = fmap(8, 8, 3, |i, c| ((i * 31 + c * 17) % 13) as f64 / 13.0);
        let extra = fmap(8, 8, 3, |i, c| ((i * 5 + c) % 7) as f64 / 20.0);
        let mut c = cfg(2, 2);
        c.iterations = 1;
        c.knn = 4;
        let inputs = ClusterInputs { semantic: fd.clone(), spectral: vec![extra] };
        let r = cluster(&inputs, &c).unwrap();
        let q = inputs.query().unwrap();
        let p0 = init_centroids(&fd, &c).unwrap();
        let a1 = compute_associations(&q, &p0, &c).unwrap();
        let p1 = update_centers(&a1, &fd, &p0).unwrap();
        let a2 = compute_associations(&q, &p1, &c).unwrap();
        assert_eq!(r.centers, p1);
        assert_eq!(r.associations, a2);
        assert_eq!(r.assignment, AssignmentMap::from_associations(&a2, 8, 8).unwrap());
    }

    #[test]
    fn assignment_stays_in_window() {
        let fd = fmap(20, 20, 2, |i, c| ((i * 13 + c * 7) % 17) as f64 / 5.0);
        let c = ClusterConfig { grid: 4, per_cell: 2, iterations: 3, knn: 5, window: 1, jitter: Some(4) };
        let inputs = ClusterInputs { semantic: fd, spectral: vec![] };
        let r = cluster(&inputs, &c).unwrap();
        let grid = Grid::new(20, 20, 4).unwrap();
        for (i, &j) in r.assignment.ids().iter().enumerate() {
            let (pr, pc) = grid.cell_of_pixel(i);
            let home = r.centers.home_cell(j as usize);
            let (hr, hc) = (home / 4, home % 4);
            assert!(pr.abs_diff(hr) <= 1 && pc.abs_diff(hc) <= 1);
        }
    }

    #[test]
    fn argmax_ties_go_to_lower_index() {
        let rows = vec![vec![
            AssocEntry { center: 2, sq_dist: 0.5 },
            AssocEntry { center: 1, sq_dist: 0.5 },
            AssocEntry { center: 3, sq_dist: 0.7 },
        ]];
        let a = AssociationMatrix::from_rows(4, rows).unwrap();
        assert_eq!(a.best(0).center, 1);
    }

    #[test]
    fn aggregate_examples() {
        let fd = FeatureMap::new(1, 1, 1, vec![2.0]).unwrap();
        let centers = CentroidSet { grid: 1, per_cell: 2, dim: 1, features: vec![0.0, 5.0], anchors: vec![] };
        let a = AssociationMatrix::from_rows(
            2,
            vec![vec![AssocEntry { center: 0, sq_dist: 0.0 }, AssocEntry { center: 1, sq_dist: 9.0 }]],
        )
        .unwrap();
        let asg = AssignmentMap::from_associations(&a, 1, 1).unwrap();
        let s = aggregate_tokens(&a, &asg, &fd, &centers).unwrap();
        // one point with a = 1: (0 + 2) / 2
        assert_eq!(s.token(0), &[1.0]);
        // no assigned points: s = p
        assert_eq!(s.token(1), &[5.0]);
        assert_eq!(s.member_counts, vec![1, 0]);
    }

    #[test]
    fn aggregate_fixed_point() {
        let p = [0.1, -0.37, 2.9];
        let fd = fmap(2, 2, 3, |_, c| p[c]);
        let centers = CentroidSet { grid: 1, per_cell: 1, dim: 3, features: p.to_vec(), anchors: vec![] };
        let rows = (0..4).map(|i| vec![AssocEntry { center: 0, sq_dist: 0.1 * i as f64 }]).collect();
        let a = AssociationMatrix::from_rows(1, rows).unwrap();
        let asg = AssignmentMap::from_associations(&a, 2, 2).unwrap();
        let s = aggregate_tokens(&a, &asg, &fd, &centers).unwrap();
        assert_eq!(s.token(0), &p);
    }

    #[test]
    fn mismatched_dims_rejected() {
        let fd = fmap(4, 4, 2, |_, _| 0.0);
        let p = init_centroids(&fd, &cfg(2, 1)).unwrap();
        let q = fmap(4, 4, 3, |_, _| 0.0);
        assert!(compute_associations(&q, &p, &cfg(2, 1)).is_err());
    }
}
