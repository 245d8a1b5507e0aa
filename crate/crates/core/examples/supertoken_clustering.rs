//! Runs feature extraction, clustering and aggregation on a synthetic scene
//! and reports token purity against the ground truth.

use std::collections::HashMap;

use supertoken::cluster::ClusterConfig;
use supertoken::pipeline::{run_stage1, Stage1Config};
use supertoken::synth::{make_synthetic_scene, SceneSpec};

fn main() -> anyhow::Result<()> {
    let (cube, labels) = make_synthetic_scene(&SceneSpec::separated(64, 16, 4, 0.05, 1.0, 0)?)?;
    for (grid, per_cell) in [(8, 1), (8, 4), (16, 4)] {
        let cfg =
            Stage1Config { cluster: ClusterConfig { grid, per_cell, ..Default::default() }, ..Default::default() };
        let out = run_stage1(&cube, &cfg)?;
        let mut votes: HashMap<(u32, u16), usize> = HashMap::new();
        for (&t, &c) in out.clusters.assignment.ids().iter().zip(labels.ids()) {
            *votes.entry((t, c)).or_default() += 1;
        }
        let mut best: HashMap<u32, usize> = HashMap::new();
        for (&(t, _), &n) in &votes {
            let b = best.entry(t).or_default();
            *b = (*b).max(n);
        }
        let pure: usize = best.values().sum();
        let empty = out.tokens.member_counts.iter().filter(|&&n| n == 0).count();
        println!(
            "grid {grid:>2} x {per_cell} per cell: {:>4} tokens ({empty} empty), purity {:.4}",
            out.tokens.count,
            pure as f64 / cube.pixels() as f64
        );
    }
    Ok(())
}
