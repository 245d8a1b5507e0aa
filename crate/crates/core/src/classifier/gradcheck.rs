//! Central finite-difference check of the analytic classifier gradients.

use super::{forward, loss_and_gradients, soft_ce_loss, ClassifierParams};
use crate::cluster::SupertokenSet;
use crate::error::{invalid, Result};
use crate::labels::SoftLabelMatrix;
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Checked parameter indices, in sampling order.
    pub coords: Vec<usize>,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    /// `|a - n| / max(|a|, |n|, scale_floor)` per coordinate.
    pub rel_errors: Vec<f64>,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

/// Compares analytic gradients with `(f(θ+h) - f(θ-h)) / 2h` on `coords`
/// distinct parameter indices drawn with `seed`.
///
/// Coordinates whose gradient magnitude is below `scale_floor` are compared
/// on the floor's scale, since their finite-difference estimate is dominated
/// by roundoff.
pub fn grad_check(
    params: &ClassifierParams,
    tokens: &SupertokenSet,
    labels: &SoftLabelMatrix,
    coords: usize,
    h: f64,
    scale_floor: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    if coords == 0 {
        return Err(invalid!("grad_check needs at least one coordinate"));
    }
    let (_, grads) = loss_and_gradients(tokens, params, labels)?;
    let n = params.len();
    let mut rng = SeededRng::new(seed);
    let mut pool: Vec<usize> = (0..n).collect();
    let take = coords.min(n);
    for i in 0..take {
        let j = i + rng.below(n - i);
        pool.swap(i, j);
    }
    let picked = pool[..take].to_vec();

    let mut probe = params.clone();
    let mut eval = |idx: usize, delta: f64| -> Result<f64> {
        let orig = probe.values[idx];
        probe.values[idx] = orig + delta;
        let loss = soft_ce_loss(&forward(tokens, &probe)?, labels);
        probe.values[idx] = orig;
        loss
    };
    let mut analytic = Vec::with_capacity(take);
    let mut numeric = Vec::with_capacity(take);
    let mut rel_errors = Vec::with_capacity(take);
    let (mut max_rel, mut max_abs) = (0.0f64, 0.0f64);
    for &idx in &picked {
        let fd = (eval(idx, h)? - eval(idx, -h)?) / (2.0 * h);
        let a = grads[idx];
        let abs = (a - fd).abs();
        let rel = abs / a.abs().max(fd.abs()).max(scale_floor);
        max_rel = max_rel.max(rel);
        max_abs = max_abs.max(abs);
        analytic.push(a);
        numeric.push(fd);
        rel_errors.push(rel);
    }
    Ok(GradCheckReport {
        coords: picked,
        analytic,
        numeric,
        rel_errors,
        max_rel_error: max_rel,
        max_abs_error: max_abs,
    })
}
