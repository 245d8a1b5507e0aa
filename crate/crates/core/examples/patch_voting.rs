//! Whole-scene prediction versus overlapping-patch prediction with voting.

use supertoken::classifier::{train, ModelConfig, TrainConfig};
use supertoken::cluster::ClusterConfig;
use supertoken::eval::{confusion, metrics};
use supertoken::labels::{soft_labels, LabelMode};
use supertoken::pipeline::{predict_patches, predict_scene, run_stage1, Stage1Config};
use supertoken::synth::{make_synthetic_scene, SceneSpec};

fn main() -> anyhow::Result<()> {
    let (cube, gt) = make_synthetic_scene(&SceneSpec::separated(64, 16, 4, 0.05, 1.0, 0)?)?;
    let s1 =
        Stage1Config { cluster: ClusterConfig { grid: 8, per_cell: 1, ..Default::default() }, ..Default::default() };
    let out = run_stage1(&cube, &s1)?;
    let labels = soft_labels(&out.clusters.assignment, &out.clusters.associations, &gt, 4, LabelMode::HardCount)?;
    let cfg = TrainConfig { epochs: 200, lr: 1e-3, ..Default::default() };
    let params = train(&[(out.tokens, labels)], ModelConfig::new(s1.token_dim, 4), &cfg)?.params;

    let (_, whole) = predict_scene(&cube, &s1, &params)?;
    println!("whole scene      OA {:.4}", metrics(&confusion(&whole, &gt, 4)?)?.overall_accuracy);
    // patches see fewer tokens, so the grid shrinks with them
    let patch_s1 = Stage1Config { cluster: ClusterConfig { grid: 4, ..s1.cluster.clone() }, ..s1.clone() };
    for (size, stride) in [(32, 32), (32, 16)] {
        let voted = predict_patches(&cube, &patch_s1, &params, size, stride)?;
        println!("patch {size} stride {stride} OA {:.4}", metrics(&confusion(&voted, &gt, 4)?)?.overall_accuracy);
    }
    Ok(())
}
