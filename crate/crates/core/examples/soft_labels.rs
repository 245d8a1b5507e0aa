//! Token soft labels from pixel ground truth in both weighting modes.

use supertoken::cluster::ClusterConfig;
use supertoken::labels::{soft_labels, LabelMode};
use supertoken::pipeline::{run_stage1, Stage1Config};
use supertoken::synth::{make_synthetic_scene, SceneSpec};

fn main() -> anyhow::Result<()> {
    let (cube, gt) = make_synthetic_scene(&SceneSpec::separated(32, 12, 3, 0.1, 1.0, 5)?)?;
    let cfg =
        Stage1Config { cluster: ClusterConfig { grid: 4, per_cell: 1, ..Default::default() }, ..Default::default() };
    let out = run_stage1(&cube, &cfg)?;
    for mode in [LabelMode::HardCount, LabelMode::AssocWeighted] {
        let labels = soft_labels(&out.clusters.assignment, &out.clusters.associations, &gt, 3, mode)?;
        println!("{mode:?}: {} of {} tokens labeled", labels.valid_count(), labels.tokens());
        for m in 0..labels.tokens().min(6) {
            println!("  token {m}: {:?}", labels.row(m));
        }
    }
    Ok(())
}
