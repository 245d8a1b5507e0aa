//! Generates a labeled synthetic scene and writes cube, labels and palette.
//!
//! cargo run --example synth_scene -- /tmp/scene

use std::path::PathBuf;

use supertoken::io::{write_cube, write_label_map, Palette};
use supertoken::synth::{make_synthetic_scene, SceneSpec};

fn main() -> anyhow::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "scene_out".into()));
    std::fs::create_dir_all(&dir)?;
    let spec = SceneSpec::separated(64, 16, 4, 0.05, 1.0, 0)?;
    let (cube, labels) = make_synthetic_scene(&spec)?;
    write_cube(&cube, &dir.join("scene.hdr"))?;
    write_label_map(&labels, &dir.join("labels.pgm"))?;
    Palette::generate(spec.num_classes).write(&dir.join("palette.txt"))?;
    println!(
        "{}x{}x{} cube with {} classes written to {}",
        cube.height(),
        cube.width(),
        cube.bands(),
        spec.num_classes,
        dir.display()
    );
    Ok(())
}
