use rayon::prelude::*;

use super::stage1::{run_stage1, Stage1Config, Stage1Output};
use crate::classifier::{forward, ClassifierParams};
use crate::cube::{ClassMap, HsiCube};
use crate::error::Result;
use crate::eval::{overlapping_patches, patch_vote, project_to_pixels};

/// Stage one on the whole cube, token classification and projection.
pub fn predict_scene(
    cube: &HsiCube,
    stage1: &Stage1Config,
    params: &ClassifierParams,
) -> Result<(Stage1Output, ClassMap)> {
    let out = run_stage1(cube, stage1)?;
    let classes = forward(&out.tokens, params)?.argmax();
    let map = project_to_pixels(&classes, &out.clusters.assignment)?;
    Ok((out, map))
}

/// Runs [`predict_scene`] on overlapping `size × size` crops and takes the
/// per-pixel majority over all crops covering each pixel.
pub fn predict_patches(
    cube: &HsiCube,
    stage1: &Stage1Config,
    params: &ClassifierParams,
    size: usize,
    stride: usize,
) -> Result<ClassMap> {
    let offsets = overlapping_patches(cube.height(), cube.width(), size, stride)?;
    let patches = offsets
        .par_iter()
        .map(|&(y, x)| {
            let crop = cube.crop(y, x, size, size)?;
            Ok((predict_scene(&crop, stage1, params)?.1, (y, x)))
        })
        .collect::<Result<Vec<_>>>()?;
    patch_vote(&patches, cube.height(), cube.width())
}
