//! Writes a scene and a config file, then runs the full pipeline and
//! verifies the artifact manifest.
//!
//! cargo run --release --example end_to_end -- /tmp/run

use std::fs;
use std::path::PathBuf;

use supertoken::io::{write_cube, write_label_map};
use supertoken::pipeline::{run_pipeline, ConfigMap, PipelineConfig};
use supertoken::synth::{make_synthetic_scene, SceneSpec};

fn main() -> anyhow::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "pipeline_out".into()));
    fs::create_dir_all(&dir)?;
    let (cube, labels) = make_synthetic_scene(&SceneSpec::separated(64, 16, 4, 0.05, 1.0, 0)?)?;
    write_cube(&cube, &dir.join("scene.hdr"))?;
    write_label_map(&labels, &dir.join("labels.pgm"))?;

    let text = format!(
        "seed = 0\n\n[paths]\ncube = {}\nlabels = {}\nout = {}\n\n[cluster]\ngrid = 8\nper_cell = 1\n\n[train]\nepochs = 200\nlr = 1e-3\n",
        dir.join("scene.hdr").display(),
        dir.join("labels.pgm").display(),
        dir.join("artifacts").display()
    );
    fs::write(dir.join("pipeline.conf"), &text)?;
    let cfg = PipelineConfig::from_map(&ConfigMap::read(&dir.join("pipeline.conf"))?)?;
    let run = run_pipeline(&cfg)?;

    print!("{}", run.manifest.to_text());
    println!(
        "{} tokens, OA {:.4}, kappa {:.4}, manifest verified: {}",
        run.token_count,
        run.metrics.overall_accuracy,
        run.metrics.kappa,
        run.manifest.verify(&cfg.paths.out)?
    );
    Ok(())
}
