use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::config::PipelineConfig;
use super::predict::{predict_patches, predict_scene};
use super::stage1::{derive, feature_fields, tokens_of};
use crate::classifier::{read_checkpoint, train, write_checkpoint, ClassifierParams};
use crate::cluster::cluster;
use crate::cube::{ClassMap, HsiCube, LabelMap};
use crate::error::{invalid, Error, Result};
use crate::eval::{confusion, metrics, MetricsReport};
use crate::features::FeatureMap;
use crate::io::{
    read_cube, read_label_map_expect, write_assignment, write_class_map, write_class_map_ppm, write_cube, write_tokens,
    Palette,
};
use crate::labels::soft_labels;

/// Stage names in execution order; one manifest entry each.
pub const STAGES: [&str; 8] = ["derive", "features", "cluster", "aggregate", "soft-labels", "train", "predict", "eval"];

/// Files written by one stage, relative to the output directory, and the
/// SHA-256 of their concatenated contents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub stage: String,
    pub files: Vec<String>,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub artifacts: Vec<Artifact>,
}

impl Manifest {
    /// One line per artifact: `stage sha256 file1,file2,...`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for a in &self.artifacts {
            let _ = writeln!(out, "{} {} {}", a.stage, a.sha256, a.files.join(","));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let artifacts = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let mut parts = l.split_whitespace();
                match (parts.next(), parts.next(), parts.next(), parts.next()) {
                    (Some(stage), Some(sha), Some(files), None) => Ok(Artifact {
                        stage: stage.to_string(),
                        sha256: sha.to_string(),
                        files: files.split(',').map(str::to_string).collect(),
                    }),
                    _ => Err(Error::Format(format!("bad manifest line {l:?}"))),
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self { artifacts })
    }

    /// Recomputes every hash from disk and compares.
    pub fn verify(&self, dir: &Path) -> Result<bool> {
        for a in &self.artifacts {
            if hash_files(dir, &a.files)? != a.sha256 {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

pub fn hash_files(dir: &Path, files: &[String]) -> Result<String> {
    let mut hasher = Sha256::new();
    for f in files {
        let path = dir.join(f);
        hasher.update(fs::read(&path).map_err(|e| Error::io(&path, e))?);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Everything a pipeline run produced, besides the files on disk.
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub manifest: Manifest,
    pub manifest_path: PathBuf,
    pub params: ClassifierParams,
    pub prediction: ClassMap,
    pub metrics: MetricsReport,
    pub token_count: usize,
}

struct Recorder<'a> {
    dir: &'a Path,
    artifacts: Vec<Artifact>,
}

impl Recorder<'_> {
    fn record(&mut self, stage: &str, files: &[&str]) -> Result<()> {
        let files: Vec<String> = files.iter().map(|f| f.to_string()).collect();
        let sha256 = hash_files(self.dir, &files)?;
        self.artifacts.push(Artifact { stage: stage.to_string(), files, sha256 });
        Ok(())
    }
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        return Err(invalid!("{what} {} does not exist", path.display()));
    }
    Ok(())
}

fn load_scene(cube: &Path, labels: &Path) -> Result<(HsiCube, LabelMap)> {
    let cube = read_cube(cube)?;
    let labels = read_label_map_expect(labels, cube.height(), cube.width())?;
    Ok((cube, labels))
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

/// Runs every stage on the configured scene, writes all intermediate
/// artifacts plus `manifest.txt` to the output directory.
///
/// Input files are checked before any computation. On a stage failure the
/// error names the stage and files already written are kept.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    let p = &cfg.paths;
    require_file(&p.cube, "cube")?;
    require_file(&p.labels, "label map")?;
    for (path, what) in [
        (&p.palette, "palette"),
        (&p.checkpoint, "checkpoint"),
        (&p.eval_cube, "evaluation cube"),
        (&p.eval_labels, "evaluation label map"),
    ] {
        if let Some(path) = path {
            require_file(path, what)?;
        }
    }
    fs::create_dir_all(&p.out).map_err(|e| Error::io(&p.out, e))?;
    let dir = p.out.as_path();
    let mut rec = Recorder { dir, artifacts: Vec::new() };

    let (cube, gt) = stage("load", load_scene(&p.cube, &p.labels))?;
    let classes = match cfg.classes {
        Some(c) => c,
        None => gt
            .max_class()
            .map(|c| c as usize + 1)
            .ok_or_else(|| invalid!("training labels contain no labeled pixel").in_stage("load"))?,
    };
    let s1 = &cfg.stage1;

    let derivatives = stage("derive", derive(&cube, s1))?;
    stage("derive", write_cube(&derivatives.first_order, &dir.join("derivative1.hdr")))?;
    let mut files = vec!["derivative1.hdr", "derivative1.raw"];
    if let Some(second) = &derivatives.second_order {
        stage("derive", write_cube(second, &dir.join("derivative2.hdr")))?;
        files.extend(["derivative2.hdr", "derivative2.raw"]);
    }
    rec.record("derive", &files)?;

    let inputs = stage("features", feature_fields(&cube, &derivatives, s1))?;
    stage(
        "features",
        (|| {
            write_cube(&inputs.semantic.to_cube()?, &dir.join("semantic.hdr"))?;
            write_cube(&inputs.query()?.to_cube()?, &dir.join("query.hdr"))
        })(),
    )?;
    rec.record("features", &["semantic.hdr", "semantic.raw", "query.hdr", "query.raw"])?;

    let clusters = stage("cluster", cluster(&inputs, &s1.cluster))?;
    stage(
        "cluster",
        (|| {
            write_assignment(&clusters.assignment, &dir.join("assignment.pgm"))?;
            let dist: Vec<f64> =
                (0..clusters.associations.num_pixels()).map(|i| clusters.associations.best(i).sq_dist).collect();
            let dist = FeatureMap::new(cube.height(), cube.width(), 1, dist)?;
            write_cube(&dist.to_cube()?, &dir.join("assignment_dist.hdr"))
        })(),
    )?;
    rec.record("cluster", &["assignment.pgm", "assignment_dist.hdr", "assignment_dist.raw"])?;

    let tokens = stage("aggregate", tokens_of(&inputs, &clusters))?;
    stage("aggregate", write_tokens(&tokens, &dir.join("tokens.hdr")))?;
    rec.record("aggregate", &["tokens.hdr", "tokens.raw", "tokens.members"])?;

    let labels =
        stage("soft-labels", soft_labels(&clusters.assignment, &clusters.associations, &gt, classes, cfg.label_mode))?;
    stage("soft-labels", labels.write_csv(&dir.join("soft_labels.csv")))?;
    rec.record("soft-labels", &["soft_labels.csv"])?;

    let params = match &p.checkpoint {
        Some(path) => {
            let params = stage("train", read_checkpoint(path))?;
            if params.config.dim != s1.token_dim || params.config.classes != classes {
                return Err(invalid!(
                    "checkpoint is {}-dim/{} classes, pipeline needs {}-dim/{classes} classes",
                    params.config.dim,
                    params.config.classes,
                    s1.token_dim
                )
                .in_stage("train"));
            }
            stage("train", write_checkpoint(&params, &dir.join("classifier.ckpt")))?;
            stage("train", fs::write(dir.join("train_log.csv"), "epoch,lr,loss\n").map_err(|e| Error::io(dir, e)))?;
            params
        }
        None => {
            let outcome = stage("train", train(&[(tokens.clone(), labels)], cfg.model(classes), &cfg.train))?;
            stage("train", write_checkpoint(&outcome.params, &dir.join("classifier.ckpt")))?;
            stage("train", outcome.write_log(&dir.join("train_log.csv")))?;
            outcome.params
        }
    };
    rec.record("train", &["classifier.ckpt", "train_log.csv"])?;

    let (eval_cube, eval_gt) = match (&p.eval_cube, &p.eval_labels) {
        (Some(c), Some(l)) => stage("predict", load_scene(c, l))?,
        _ => (cube, gt),
    };
    let prediction = stage(
        "predict",
        match cfg.patch {
            Some(size) => predict_patches(&eval_cube, s1, &params, size, cfg.stride),
            None => predict_scene(&eval_cube, s1, &params).map(|(_, map)| map),
        },
    )?;
    let palette = match &p.palette {
        Some(path) => stage("predict", Palette::read(path))?,
        None => Palette::generate(classes),
    };
    stage("predict", write_class_map(&prediction, &dir.join("prediction.pgm")))?;
    stage("predict", write_class_map_ppm(&prediction, &palette, &dir.join("prediction.ppm")))?;
    rec.record("predict", &["prediction.pgm", "prediction.ppm"])?;

    let cm = stage("eval", confusion(&prediction, &eval_gt, classes))?;
    let report = stage("eval", metrics(&cm))?;
    stage("eval", report.write_csv(&dir.join("metrics.csv")))?;
    stage("eval", cm.write_csv(&dir.join("confusion.csv")))?;
    rec.record("eval", &["metrics.csv", "confusion.csv"])?;

    let manifest = Manifest { artifacts: rec.artifacts };
    let manifest_path = dir.join("manifest.txt");
    fs::write(&manifest_path, manifest.to_text()).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(PipelineOutcome { manifest, manifest_path, params, prediction, metrics: report, token_count: tokens.count })
}
