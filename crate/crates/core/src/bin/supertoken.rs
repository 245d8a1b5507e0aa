use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use supertoken::classifier::{forward, read_checkpoint, train, write_checkpoint, ModelConfig, TrainConfig};
use supertoken::cluster::{AssocEntry, AssociationMatrix, ClusterConfig};
use supertoken::cube::HsiCube;
use supertoken::derivative::DerivativeStack;
use supertoken::eval::{confusion, metrics, project_to_pixels};
use supertoken::features::{semantic_features, ProviderConfig, ProviderKind};
use supertoken::io::{
    read_assignment, read_class_map, read_cube, read_label_map, read_label_map_expect, read_tokens, write_assignment,
    write_class_map, write_class_map_ppm, write_cube, write_label_map, write_tokens, Palette,
};
use supertoken::labels::{soft_labels, LabelMode, SoftLabelMatrix};
use supertoken::pipeline::{self, parse_terms, run_stage1, ConfigMap, PipelineConfig, Stage1Config};
use supertoken::rng::{derive_seed, streams};
use supertoken::synth::{grid_layout, make_synthetic_scene, SceneSpec};

#[derive(Parser)]
#[command(name = "supertoken", version, about = "Spectral supertoken hyperspectral classification")]
struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled scene.
    Synth(SynthArgs),
    /// First/second-order spectral derivatives of a cube.
    Derive(DeriveArgs),
    /// Semantic feature field of a cube.
    Features(FeaturesArgs),
    /// Cluster a cube into supertokens.
    Cluster(ClusterArgs),
    /// Class-proportion labels for supertokens.
    SoftLabels(SoftLabelArgs),
    /// Train the token classifier.
    Train(TrainArgs),
    /// Classify tokens and project the classes to pixels.
    Predict(PredictArgs),
    /// Confusion matrix and metrics of a prediction.
    Eval(EvalArgs),
    /// Run every stage from a config file.
    Pipeline(PipelineArgs),
    /// Time the stages and report operation counts.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 64)]
    size: usize,
    #[arg(long, default_value_t = 16)]
    bands: usize,
    #[arg(long, default_value_t = 4)]
    classes: usize,
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long, default_value_t = 1.0)]
    min_distance: f64,
    /// Blocks per side; defaults to the smallest square holding every class.
    #[arg(long)]
    blocks: Option<usize>,
    /// Seed of the class spectra.
    #[arg(long)]
    seed: u64,
    /// Seed of the noise (defaults to seed + 1).
    #[arg(long)]
    noise_seed: Option<u64>,
}

#[derive(Args)]
struct DeriveArgs {
    #[arg(long)]
    cube: PathBuf,
    #[arg(long, default_value_t = 1)]
    step: usize,
    /// First-order output header.
    #[arg(long)]
    out: PathBuf,
    /// Also write the second-order derivative here.
    #[arg(long)]
    second: Option<PathBuf>,
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(long)]
    cube: PathBuf,
    #[arg(long, default_value = "linear")]
    provider: ProviderKind,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Stage1Args {
    #[arg(long, default_value = "linear")]
    provider: ProviderKind,
    /// Semantic feature width.
    #[arg(long, default_value_t = 32)]
    dim: usize,
    /// Token width.
    #[arg(long, default_value_t = 32)]
    token_dim: usize,
    #[arg(long, default_value_t = 1)]
    step: usize,
    /// Spectral terms in the association query: spectrum,first,second or none.
    #[arg(long, default_value = "spectrum,first")]
    terms: String,
    #[arg(long, default_value_t = 16)]
    grid: usize,
    #[arg(long, default_value_t = 4)]
    per_cell: usize,
    #[arg(long, default_value_t = 4)]
    iters: usize,
    #[arg(long, default_value_t = 9)]
    knn: usize,
    #[arg(long, default_value_t = 1)]
    window: usize,
    /// Randomize anchor placement with this seed.
    #[arg(long)]
    jitter: Option<u64>,
    #[arg(long)]
    seed: u64,
}

impl Stage1Args {
    fn config(&self) -> Result<Stage1Config> {
        Ok(Stage1Config {
            provider: ProviderConfig { kind: self.provider, dim: self.dim, seed: self.seed },
            token_dim: self.token_dim,
            step: self.step,
            terms: parse_terms(&self.terms)?,
            cluster: ClusterConfig {
                grid: self.grid,
                per_cell: self.per_cell,
                iterations: self.iters,
                knn: self.knn,
                window: self.window,
                jitter: self.jitter,
            },
            seed: self.seed,
        })
    }
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    cube: PathBuf,
    #[command(flatten)]
    stage1: Stage1Args,
    /// Receives assignment.pgm, assignment_dist.hdr and tokens.hdr.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SoftLabelArgs {
    #[arg(long)]
    assignment: PathBuf,
    /// Token file; fixes the token count.
    #[arg(long)]
    tokens: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// Class count (defaults to the largest label + 1).
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long, default_value = "hard-count")]
    mode: LabelMode,
    /// Squared distance of every pixel to its center (needed for assoc-weighted).
    #[arg(long)]
    dist: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Token files, one per scene.
    #[arg(long, required = true, num_args = 1..)]
    tokens: Vec<PathBuf>,
    /// Soft-label CSVs in the same order as --tokens.
    #[arg(long, required = true, num_args = 1..)]
    soft_labels: Vec<PathBuf>,
    #[arg(long, default_value_t = 4)]
    heads: usize,
    #[arg(long, default_value_t = 2)]
    blocks: usize,
    #[arg(long, default_value_t = 4)]
    mlp_ratio: usize,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 8)]
    batch: usize,
    #[arg(long, default_value_t = 5e-4)]
    lr: f64,
    #[arg(long, default_value_t = 0.0)]
    lr_floor: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch CSV log.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    tokens: PathBuf,
    #[arg(long)]
    assignment: PathBuf,
    /// Class map as 16-bit PGM.
    #[arg(long)]
    out: PathBuf,
    /// Colorized PPM output.
    #[arg(long)]
    ppm: Option<PathBuf>,
    #[arg(long)]
    palette: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    classes: usize,
    #[arg(long)]
    metrics: PathBuf,
    #[arg(long)]
    confusion: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    config: PathBuf,
    /// `key=value` overrides applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    /// CSV report (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let (name, result) = match &cli.command {
        Command::Synth(a) => ("synth", synth(a)),
        Command::Derive(a) => ("derive", derive(a)),
        Command::Features(a) => ("features", features(a)),
        Command::Cluster(a) => ("cluster", cluster(a)),
        Command::SoftLabels(a) => ("soft-labels", soft_label_cmd(a)),
        Command::Train(a) => ("train", train_cmd(a)),
        Command::Predict(a) => ("predict", predict(a)),
        Command::Eval(a) => ("eval", eval(a)),
        Command::Pipeline(a) => ("pipeline", run_pipeline(a)),
        Command::Bench(a) => ("bench", bench(a)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {name}: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn synth(a: &SynthArgs) -> Result<()> {
    let mut spec = SceneSpec::separated(a.size, a.bands, a.classes, a.noise, a.min_distance, a.seed)?;
    if let Some(b) = a.blocks {
        let ids: Vec<u16> = (0..a.classes as u16).collect();
        spec.regions = grid_layout(a.size, a.size, b, b, &ids);
    }
    if let Some(s) = a.noise_seed {
        spec.seed = s;
    }
    let (cube, labels) = make_synthetic_scene(&spec)?;
    create_dir(&a.out_dir)?;
    write_cube(&cube, &a.out_dir.join("scene.hdr"))?;
    write_label_map(&labels, &a.out_dir.join("labels.pgm"))?;
    Palette::generate(a.classes).write(&a.out_dir.join("palette.txt"))?;
    println!("{}", a.out_dir.join("scene.hdr").display());
    Ok(())
}

fn derive(a: &DeriveArgs) -> Result<()> {
    let cube = read_cube(&a.cube)?;
    let stack = DerivativeStack::compute(&cube, a.step, a.second.is_some())?;
    write_cube(&stack.first_order, &a.out)?;
    if let (Some(path), Some(second)) = (&a.second, &stack.second_order) {
        write_cube(second, path)?;
    }
    Ok(())
}

fn features(a: &FeaturesArgs) -> Result<()> {
    let cube = read_cube(&a.cube)?;
    let cfg = ProviderConfig { kind: a.provider, dim: a.dim, seed: derive_seed(a.seed, streams::SEMANTIC) };
    write_cube(&semantic_features(&cube, &cfg)?.to_cube()?, &a.out)?;
    Ok(())
}

fn cluster(a: &ClusterArgs) -> Result<()> {
    let cube = read_cube(&a.cube)?;
    let out = run_stage1(&cube, &a.stage1.config()?)?;
    create_dir(&a.out_dir)?;
    let assoc = &out.clusters.associations;
    write_assignment(&out.clusters.assignment, &a.out_dir.join("assignment.pgm"))?;
    let dist: Vec<f64> = (0..assoc.num_pixels()).map(|i| assoc.best(i).sq_dist).collect();
    let dist = HsiCube::new(cube.height(), cube.width(), 1, dist)?;
    write_cube(&dist, &a.out_dir.join("assignment_dist.hdr"))?;
    write_tokens(&out.tokens, &a.out_dir.join("tokens.hdr"))?;
    println!("{} supertokens", out.tokens.count);
    Ok(())
}

fn soft_label_cmd(a: &SoftLabelArgs) -> Result<()> {
    let tokens = read_tokens(&a.tokens)?;
    let assignment = read_assignment(&a.assignment, tokens.count)?;
    let gt = read_label_map_expect(&a.labels, assignment.height(), assignment.width())?;
    let classes = match a.classes {
        Some(c) => c,
        None => gt.max_class().map(|c| c as usize + 1).context("label map has no labeled pixel")?,
    };
    // one entry per pixel: its assigned center and squared distance
    let rows = match (&a.dist, a.mode) {
        (Some(path), _) => {
            let dist = read_cube(path)?;
            if dist.pixels() != assignment.len() || dist.bands() != 1 {
                bail!("distance map does not match the assignment");
            }
            assignment
                .ids()
                .iter()
                .zip(dist.data())
                .map(|(&center, &sq_dist)| vec![AssocEntry { center, sq_dist }])
                .collect()
        }
        (None, LabelMode::AssocWeighted) => bail!("assoc-weighted mode needs --dist"),
        (None, LabelMode::HardCount) => {
            assignment.ids().iter().map(|&center| vec![AssocEntry { center, sq_dist: 0.0 }]).collect()
        }
    };
    let assoc = AssociationMatrix::from_rows(tokens.count, rows)?;
    soft_labels(&assignment, &assoc, &gt, classes, a.mode)?.write_csv(&a.out)?;
    Ok(())
}

fn train_cmd(a: &TrainArgs) -> Result<()> {
    if a.tokens.len() != a.soft_labels.len() {
        bail!("{} token files but {} soft-label files", a.tokens.len(), a.soft_labels.len());
    }
    let scenes = a
        .tokens
        .iter()
        .zip(&a.soft_labels)
        .map(|(t, l)| Ok((read_tokens(t)?, SoftLabelMatrix::read_csv(l)?)))
        .collect::<Result<Vec<_>>>()?;
    let (dim, classes) = (scenes[0].0.dim, scenes[0].1.classes());
    let model = ModelConfig { dim, heads: a.heads, blocks: a.blocks, classes, mlp_ratio: a.mlp_ratio };
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch,
        lr: a.lr,
        lr_floor: a.lr_floor,
        seed: a.seed,
        ..Default::default()
    };
    let outcome = train(&scenes, model, &cfg)?;
    write_checkpoint(&outcome.params, &a.out)?;
    if let Some(log) = &a.log {
        outcome.write_log(log)?;
    }
    println!("final loss {:.6}", outcome.final_loss());
    Ok(())
}

fn predict(a: &PredictArgs) -> Result<()> {
    let params = read_checkpoint(&a.checkpoint)?;
    let tokens = read_tokens(&a.tokens)?;
    let assignment = read_assignment(&a.assignment, tokens.count)?;
    let classes = forward(&tokens, &params)?.argmax();
    let map = project_to_pixels(&classes, &assignment)?;
    write_class_map(&map, &a.out)?;
    if let Some(ppm) = &a.ppm {
        let palette = match &a.palette {
            Some(p) => Palette::read(p)?,
            None => Palette::generate(params.config.classes),
        };
        write_class_map_ppm(&map, &palette, ppm)?;
    }
    Ok(())
}

fn eval(a: &EvalArgs) -> Result<()> {
    let pred = read_class_map(&a.pred)?;
    let gt = read_label_map(&a.labels)?;
    let cm = confusion(&pred, &gt, a.classes)?;
    let m = metrics(&cm)?;
    m.write_csv(&a.metrics)?;
    cm.write_csv(&a.confusion)?;
    println!(
        "OA {:.4}  AA {:.4}  kappa {:.4}  mIoU {:.4}  CF1 {:.4}",
        m.overall_accuracy, m.average_accuracy, m.kappa, m.miou, m.class_f1
    );
    Ok(())
}

fn load_config(path: &Path, overrides: &[String]) -> Result<ConfigMap> {
    let mut map = ConfigMap::read(path)?;
    for o in overrides {
        map.apply_override(o)?;
    }
    Ok(map)
}

fn run_pipeline(a: &PipelineArgs) -> Result<()> {
    let cfg = PipelineConfig::from_map(&load_config(&a.config, &a.overrides)?)?;
    let outcome = pipeline::run_pipeline(&cfg)?;
    let m = &outcome.metrics;
    println!(
        "{} supertokens  OA {:.4}  kappa {:.4}  mIoU {:.4}  CF1 {:.4}",
        outcome.token_count, m.overall_accuracy, m.kappa, m.miou, m.class_f1
    );
    println!("{}", outcome.manifest_path.display());
    Ok(())
}

fn bench(a: &BenchArgs) -> Result<()> {
    let mut map = load_config(&a.config, &a.overrides)?;
    // the benchmark reads only the cube
    for key in ["paths.labels", "paths.out"] {
        if map.get(key).is_none() {
            map.set(key, "-");
        }
    }
    let cfg = PipelineConfig::from_map(&map)?;
    let cube = read_cube(&cfg.paths.cube)?;
    let report = pipeline::bench(&cube, &cfg.stage1, cfg.model(cfg.classes.unwrap_or(1)), a.repeats)?;
    match &a.out {
        Some(path) => fs::write(path, report.to_csv()).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{}", report.to_csv()),
    }
    Ok(())
}
