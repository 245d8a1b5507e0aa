//! Stage timings and operation counts at two scene sizes.

use supertoken::classifier::ModelConfig;
use supertoken::pipeline::{bench, Stage1Config};
use supertoken::synth::{make_synthetic_scene, SceneSpec};

fn main() -> anyhow::Result<()> {
    let s1 = Stage1Config::default();
    for size in [64, 128] {
        let (cube, _) = make_synthetic_scene(&SceneSpec::separated(size, 32, 4, 0.05, 1.0, 0)?)?;
        let report = bench(&cube, &s1, ModelConfig::new(s1.token_dim, 4), 3)?;
        println!("{size}x{size}, {:.0} pixels/s", report.pixels_per_second);
        print!("{}", report.to_csv());
    }
    Ok(())
}
