//! End-to-end orchestration: stage one, training, prediction, evaluation,
//! configuration files, artifact manifests and benchmarking.

mod bench;
mod config;
mod predict;
mod run;
mod stage1;

pub use bench::{association_ops, bench, op_counts, window_pairs, BenchReport, OpCount, StageBench, BENCH_STAGES};
pub use config::{ConfigMap, PipelineConfig, PipelinePaths};
pub use predict::{predict_patches, predict_scene};
pub use run::{hash_files, run_pipeline, Artifact, Manifest, PipelineOutcome, STAGES};
pub use stage1::{
    derive, feature_fields, parse_terms, run_stage1, tokens_of, SpectralTerm, Stage1Config, Stage1Output,
};
