//! Stage timing with analytic arithmetic-operation counters.
//!
//! Counters are closed-form functions of the scene shape and configuration,
//! so they are identical across repeats and machines. Only the wall-clock
//! fields vary.

use std::fmt::Write as _;
use std::ops::{Add, Mul};
use std::time::Instant;

use super::stage1::{derive, feature_fields, tokens_of, SpectralTerm, Stage1Config};
use crate::classifier::{forward, ClassifierParams, ModelConfig};
use crate::cluster::{cluster, window_centers, ClusterConfig, Grid};
use crate::cube::HsiCube;
use crate::error::{invalid, Result};
use crate::features::ProviderKind;
use crate::rng::{derive_seed, streams};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCount {
    pub adds: u64,
    pub mults: u64,
    /// `exp`/`tanh` evaluations.
    pub transcendentals: u64,
}

impl OpCount {
    pub fn new(adds: u64, mults: u64, transcendentals: u64) -> Self {
        Self { adds, mults, transcendentals }
    }

    pub fn total(&self) -> u64 {
        self.adds + self.mults + self.transcendentals
    }
}

impl Add for OpCount {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self::new(self.adds + o.adds, self.mults + o.mults, self.transcendentals + o.transcendentals)
    }
}

impl Mul<u64> for OpCount {
    type Output = Self;

    fn mul(self, k: u64) -> Self {
        Self::new(self.adds * k, self.mults * k, self.transcendentals * k)
    }
}

pub const BENCH_STAGES: [&str; 5] = ["derivatives", "features", "clustering", "aggregation", "forward"];

#[derive(Debug, Clone, PartialEq)]
pub struct StageBench {
    pub name: &'static str,
    /// Median over repeats, milliseconds.
    pub millis: f64,
    pub ops: OpCount,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub repeats: usize,
    pub pixels: usize,
    pub stages: Vec<StageBench>,
    /// Median of the per-repeat totals, milliseconds.
    pub total_millis: f64,
    pub pixels_per_second: f64,
}

impl BenchReport {
    pub fn stage(&self, name: &str) -> Option<&StageBench> {
        self.stages.iter().find(|s| s.name == name)
    }

    /// CSV `stage,millis,adds,mults,transcendentals` with a `total` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,millis,adds,mults,transcendentals\n");
        let mut sum = OpCount::default();
        for s in &self.stages {
            let _ =
                writeln!(out, "{},{:.3},{},{},{}", s.name, s.millis, s.ops.adds, s.ops.mults, s.ops.transcendentals);
            sum = sum + s.ops;
        }
        let _ = writeln!(out, "total,{:.3},{},{},{}", self.total_millis, sum.adds, sum.mults, sum.transcendentals);
        let _ = writeln!(out, "# pixels_per_second,{:.1}", self.pixels_per_second);
        out
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Times stage one plus a classifier forward pass `repeats` times and
/// reports per-stage medians. The classifier is freshly initialized.
pub fn bench(cube: &HsiCube, stage1: &Stage1Config, model: ModelConfig, repeats: usize) -> Result<BenchReport> {
    if repeats == 0 {
        return Err(invalid!("repeats must be ≥ 1"));
    }
    stage1.validate()?;
    if model.dim != stage1.token_dim {
        return Err(invalid!("model width {} differs from token width {}", model.dim, stage1.token_dim));
    }
    let params = ClassifierParams::init(model, derive_seed(stage1.seed, streams::CLASSIFIER_INIT))?;
    let ops = op_counts(cube, stage1, &model)?;
    let mut times = vec![Vec::with_capacity(repeats); BENCH_STAGES.len()];
    let mut totals = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        let mut lap = start;
        let mut tick = |slot: usize| {
            let now = Instant::now();
            times[slot].push((now - lap).as_secs_f64() * 1e3);
            lap = now;
        };
        let derivatives = derive(cube, stage1)?;
        tick(0);
        let inputs = feature_fields(cube, &derivatives, stage1)?;
        tick(1);
        let clusters = cluster(&inputs, &stage1.cluster)?;
        tick(2);
        let tokens = tokens_of(&inputs, &clusters)?;
        tick(3);
        forward(&tokens, &params)?;
        tick(4);
        totals.push(start.elapsed().as_secs_f64() * 1e3);
    }
    let stages = BENCH_STAGES
        .iter()
        .zip(times.iter_mut())
        .zip(ops)
        .map(|((&name, t), ops)| StageBench { name, millis: median(t), ops })
        .collect();
    let total_millis = median(&mut totals);
    Ok(BenchReport {
        repeats,
        pixels: cube.pixels(),
        stages,
        total_millis,
        pixels_per_second: cube.pixels() as f64 / (total_millis.max(1e-6) / 1e3),
    })
}

fn linear_ops(pixels: u64, in_dim: u64, out_dim: u64) -> OpCount {
    OpCount::new(pixels * out_dim * in_dim, pixels * out_dim * in_dim, 0)
}

/// `Σ_i |window(i)|`: pixel-center pairs scored per association round.
pub fn window_pairs(height: usize, width: usize, cfg: &ClusterConfig) -> Result<u64> {
    let grid = Grid::new(height, width, cfg.grid)?;
    let windows = window_centers(&grid, cfg.per_cell, cfg.window);
    Ok((0..height * width).map(|i| windows[grid.cell_index(i)].len() as u64).sum())
}

/// Association work over all `T + 1` rounds: per pixel-center pair `3C`
/// adds, `C` multiplications and one exponential.
pub fn association_ops(height: usize, width: usize, cfg: &Stage1Config) -> Result<OpCount> {
    let c = cfg.token_dim as u64;
    let pairs = window_pairs(height, width, &cfg.cluster)?;
    Ok(OpCount::new(3 * c, c, 1) * (pairs * (cfg.cluster.iterations as u64 + 1)))
}

/// Counters in [`BENCH_STAGES`] order.
pub fn op_counts(cube: &HsiCube, cfg: &Stage1Config, model: &ModelConfig) -> Result<[OpCount; 5]> {
    let (h, w) = (cube.height(), cube.width());
    let n = cube.pixels() as u64;
    let d = cube.bands() as u64;
    let s = cfg.step as u64;
    let c = cfg.token_dim as u64;
    let second = cfg.terms.contains(&SpectralTerm::Second);

    let first_bands = d.saturating_sub(s);
    let mut derivatives = OpCount::new(n * first_bands, n * first_bands, 0);
    if second {
        let b = d.saturating_sub(2 * s);
        derivatives = derivatives + OpCount::new(2 * n * b, 2 * n * b, 0);
    }

    let c1 = cfg.provider.dim as u64;
    let mut features = linear_ops(n, d, c1) + linear_ops(n, c1, c);
    if cfg.provider.kind == ProviderKind::LocalAvg {
        // 3×3 box sum over in-image neighbors, one division per value
        let span = |len: usize| -> u64 { (0..len).map(|p| (p.min(1) + 1 + usize::from(p + 1 < len)) as u64).sum() };
        let neighbors = span(h) * span(w);
        features = features + OpCount::new(d * (neighbors - n), d * n, 0);
    }
    for term in &cfg.terms {
        let bands = match term {
            SpectralTerm::Spectrum => d,
            SpectralTerm::First => first_bands,
            SpectralTerm::Second => d.saturating_sub(2 * s),
        };
        features = features + linear_ops(n, bands, c);
    }
    features = features + OpCount::new(n * c * cfg.terms.len() as u64, 0, 0);

    let cl = &cfg.cluster;
    let pairs = window_pairs(h, w, cl)?;
    let centers = cl.num_centers() as u64;
    let rounds = cl.iterations as u64;
    let init = OpCount::new(centers * cl.knn as u64 * c, centers * c, 0);
    let association = association_ops(h, w, cfg)?;
    let update = (OpCount::new(c + 1, c, 1) * pairs + OpCount::new(0, centers * c, 0)) * rounds;
    let clustering = init + association + update;

    let aggregation = OpCount::new(n * (2 * c + 1), n * c, n) + OpCount::new(centers * c, centers * c, 0);

    let m = centers;
    let (dim, hid, k, heads) = (model.dim as u64, model.hidden() as u64, model.classes as u64, model.heads as u64);
    let layer_norm = OpCount::new(m * 4 * dim, m * 3 * dim, 0);
    let block = layer_norm * 2
        + OpCount::new(4 * m * dim * dim, 4 * m * dim * dim, 0)
        + OpCount::new(2 * m * m * dim + m * m * heads, 2 * m * m * dim + m * m * heads, m * m * heads)
        + OpCount::new(2 * m * dim * hid + m * (hid + 2 * dim), 2 * m * dim * hid + 4 * m * hid, m * hid);
    let forward =
        block * model.blocks as u64 + layer_norm + OpCount::new(m * dim * k + 2 * m * k, m * dim * k + m * k, m * k);

    Ok([derivatives, features, clustering, aggregation, forward])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(h: usize, w: usize) -> HsiCube {
        HsiCube::new(h, w, 8, (0..h * w * 8).map(|i| ((i * 37) % 101) as f64 / 101.0).collect()).unwrap()
    }

    fn cfg() -> Stage1Config {
        Stage1Config {
            token_dim: 8,
            cluster: ClusterConfig { grid: 4, per_cell: 1, ..Default::default() },
            ..Default::default()
        }
    }

    #[test]
    fn counters_are_pure_and_scale_with_area() {
        let model = ModelConfig::new(8, 3);
        let a = op_counts(&cube(16, 16), &cfg(), &model).unwrap();
        assert_eq!(a, op_counts(&cube(16, 16), &cfg(), &model).unwrap());
        let small = association_ops(16, 16, &cfg()).unwrap();
        assert_eq!(association_ops(16, 32, &cfg()).unwrap(), small * 2);
        assert_eq!(association_ops(32, 32, &cfg()).unwrap(), small * 4);
        // 4×4 grid, radius 1: corner cells see 4 centers, edges 6, interior 9
        assert_eq!(window_pairs(16, 16, &cfg().cluster).unwrap(), 16 * (4 * 4 + 8 * 6 + 4 * 9));
        assert_eq!(small.transcendentals, 16 * 100 * 5);
    }

    #[test]
    fn report_shape() {
        let r = bench(&cube(16, 16), &cfg(), ModelConfig::new(8, 3), 3).unwrap();
        assert_eq!(r.stages.len(), 5);
        let max = r.stages.iter().map(|s| s.millis).fold(0.0, f64::max);
        assert!(r.stages.iter().all(|s| s.millis >= 0.0));
        assert!(r.total_millis >= max);
        assert!(r.to_csv().starts_with("stage,millis"));
        assert!(bench(&cube(16, 16), &cfg(), ModelConfig::new(8, 3), 0).is_err());
    }
}
