//! Trains the token classifier and prints the loss curve every 20 epochs.

use supertoken::classifier::{train, ModelConfig, TrainConfig};
use supertoken::cluster::ClusterConfig;
use supertoken::labels::{soft_labels, LabelMode};
use supertoken::pipeline::{run_stage1, Stage1Config};
use supertoken::synth::{make_synthetic_scene, SceneSpec};

fn main() -> anyhow::Result<()> {
    let (cube, gt) = make_synthetic_scene(&SceneSpec::separated(64, 16, 4, 0.05, 1.0, 0)?)?;
    let s1 =
        Stage1Config { cluster: ClusterConfig { grid: 8, per_cell: 1, ..Default::default() }, ..Default::default() };
    let out = run_stage1(&cube, &s1)?;
    let labels = soft_labels(&out.clusters.assignment, &out.clusters.associations, &gt, 4, LabelMode::HardCount)?;
    let cfg = TrainConfig { epochs: 200, lr: 1e-3, ..Default::default() };
    let trained = train(&[(out.tokens, labels)], ModelConfig::new(s1.token_dim, 4), &cfg)?;
    for log in trained.log.iter().filter(|l| l.epoch % 20 == 0) {
        println!("epoch {:>3}  lr {:.2e}  loss {:.5}", log.epoch, log.lr, log.loss);
    }
    println!("final loss {:.5}, {} parameters", trained.final_loss(), trained.params.len());
    Ok(())
}
