use rayon::prelude::*;

use super::{AssignmentMap, AssociationMatrix, CentroidSet};
use crate::error::{shape, Result};
use crate::features::FeatureMap;

/// Token features `S` (`count × dim`) and how many pixels each token holds.
#[derive(Debug, Clone, PartialEq)]
pub struct SupertokenSet {
    pub count: usize,
    pub dim: usize,
    pub features: Vec<f64>,
    pub member_counts: Vec<usize>,
}

impl SupertokenSet {
    pub fn new(count: usize, dim: usize, features: Vec<f64>, member_counts: Vec<usize>) -> Result<Self> {
        if features.len() != count * dim || member_counts.len() != count {
            return Err(shape!("token set {count}x{dim} has inconsistent buffers"));
        }
        Ok(Self { count, dim, features, member_counts })
    }

    pub fn token(&self, j: usize) -> &[f64] {
        &self.features[j * self.dim..(j + 1) * self.dim]
    }
}

/// `s_j = (p_j + Σ a_i f_i) / (1 + Σ a_i)` over the pixels assigned to
/// center `j`, with `a_i = A(i, j)`. Empty tokens take `s_j = p_j`.
///
/// Evaluated as `p_j + Σ a_i (f_i - p_j) / (1 + Σ a_i)` so that members equal
/// to the center reproduce it exactly.
pub fn aggregate_tokens(
    assoc: &AssociationMatrix,
    assignment: &AssignmentMap,
    semantic: &FeatureMap,
    centers: &CentroidSet,
) -> Result<SupertokenSet> {
    let n = semantic.len();
    if assignment.len() != n || assoc.num_pixels() != n {
        return Err(shape!("assignment, associations and features disagree on pixel count"));
    }
    if centers.dim != semantic.dim() || assignment.num_centers() != centers.count() {
        return Err(shape!("center set does not match features or assignment"));
    }
    let members = assignment.members();
    let dim = centers.dim;
    let features: Vec<f64> = members
        .par_iter()
        .enumerate()
        .flat_map_iter(|(j, pixels)| {
            let p = centers.feature(j);
            let mut offset = vec![0.0; dim];
            let mut den = 1.0;
            for &i in pixels {
                let a = assoc.weight(i, j);
                den += a;
                for ((o, f), pc) in offset.iter_mut().zip(semantic.row(i)).zip(p) {
                    *o += a * (f - pc);
                }
            }
            p.iter().zip(offset).map(move |(pc, o)| pc + o / den)
        })
        .collect();
    let member_counts = members.iter().map(Vec::len).collect();
    SupertokenSet::new(centers.count(), dim, features, member_counts)
}
