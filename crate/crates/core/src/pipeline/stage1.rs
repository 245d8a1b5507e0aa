//! Cube to supertokens: derivatives, feature fields, clustering, aggregation.

use std::fmt;
use std::str::FromStr;

use crate::cluster::{aggregate_tokens, cluster, ClusterConfig, ClusterInputs, ClusterResult, SupertokenSet};
use crate::cube::HsiCube;
use crate::derivative::DerivativeStack;
use crate::error::{invalid, Error, Result};
use crate::features::{project_features, semantic_features, FeatureMap, LinearMap, ProviderConfig};
use crate::rng::{derive_seed, streams};

/// A spectral term added to the semantic features in the association query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SpectralTerm {
    /// Projected raw spectrum.
    Spectrum,
    /// Projected first-order derivative.
    First,
    /// Projected second-order derivative.
    Second,
}

impl FromStr for SpectralTerm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "spectrum" => Ok(Self::Spectrum),
            "first" => Ok(Self::First),
            "second" => Ok(Self::Second),
            other => Err(invalid!("unknown spectral term `{other}` (expected spectrum|first|second)")),
        }
    }
}

impl fmt::Display for SpectralTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Spectrum => "spectrum",
            Self::First => "first",
            Self::Second => "second",
        })
    }
}

/// Parses a comma-separated term list; `none` or an empty string selects no terms.
pub fn parse_terms(s: &str) -> Result<Vec<SpectralTerm>> {
    let s = s.trim();
    if s.is_empty() || s == "none" {
        return Ok(Vec::new());
    }
    let mut terms = s.split(',').map(SpectralTerm::from_str).collect::<Result<Vec<_>>>()?;
    terms.sort();
    terms.dedup();
    Ok(terms)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage1Config {
    /// Semantic provider; its `dim` is the semantic width.
    pub provider: ProviderConfig,
    /// Common width of the projected maps and of the tokens.
    pub token_dim: usize,
    /// Band step of the finite differences.
    pub step: usize,
    pub terms: Vec<SpectralTerm>,
    pub cluster: ClusterConfig,
    pub seed: u64,
}

impl Default for Stage1Config {
    fn default() -> Self {
        Self {
            provider: ProviderConfig::default(),
            token_dim: 32,
            step: 1,
            terms: vec![SpectralTerm::Spectrum, SpectralTerm::First],
            cluster: ClusterConfig::default(),
            seed: 0,
        }
    }
}

impl Stage1Config {
    pub fn validate(&self) -> Result<()> {
        if self.token_dim == 0 || self.provider.dim == 0 {
            return Err(invalid!("feature widths must be ≥ 1"));
        }
        if self.step == 0 {
            return Err(invalid!("derivative step must be ≥ 1"));
        }
        self.cluster.validate()
    }

    fn needs_second(&self) -> bool {
        self.terms.contains(&SpectralTerm::Second)
    }
}

/// Every intermediate of stage one.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage1Output {
    pub derivatives: DerivativeStack,
    /// Semantic field projected to the token width.
    pub semantic: FeatureMap,
    /// Projected spectral terms in the order of `Stage1Config::terms`.
    pub spectral: Vec<FeatureMap>,
    pub clusters: ClusterResult,
    pub tokens: SupertokenSet,
}

pub fn derive(cube: &HsiCube, cfg: &Stage1Config) -> Result<DerivativeStack> {
    DerivativeStack::compute(cube, cfg.step, cfg.needs_second())
}

/// Semantic field at the token width plus the projected spectral terms.
pub fn feature_fields(cube: &HsiCube, derivatives: &DerivativeStack, cfg: &Stage1Config) -> Result<ClusterInputs> {
    let provider = ProviderConfig { seed: derive_seed(cfg.seed, streams::SEMANTIC), ..cfg.provider.clone() };
    let raw = semantic_features(cube, &provider)?;
    let to_token = LinearMap::init(provider.dim, cfg.token_dim, derive_seed(cfg.seed, streams::SEMANTIC_TO_TOKEN))?;
    let semantic = project_features(&raw, &to_token)?;
    let spectral = cfg
        .terms
        .iter()
        .map(|term| {
            let (source, stream) = match term {
                SpectralTerm::Spectrum => (cube, streams::SPECTRUM),
                SpectralTerm::First => (&derivatives.first_order, streams::FIRST_DERIVATIVE),
                SpectralTerm::Second => (
                    derivatives
                        .second_order
                        .as_ref()
                        .ok_or_else(|| invalid!("second-order derivative was not computed"))?,
                    streams::SECOND_DERIVATIVE,
                ),
            };
            let map = LinearMap::init(source.bands(), cfg.token_dim, derive_seed(cfg.seed, stream))?;
            project_features(&FeatureMap::from_cube(source), &map)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClusterInputs { semantic, spectral })
}

pub fn tokens_of(inputs: &ClusterInputs, clusters: &ClusterResult) -> Result<SupertokenSet> {
    aggregate_tokens(&clusters.associations, &clusters.assignment, &inputs.semantic, &clusters.centers)
}

/// Runs all of stage one on `cube`.
pub fn run_stage1(cube: &HsiCube, cfg: &Stage1Config) -> Result<Stage1Output> {
    cfg.validate()?;
    let derivatives = derive(cube, cfg).map_err(|e| e.in_stage("derive"))?;
    let inputs = feature_fields(cube, &derivatives, cfg).map_err(|e| e.in_stage("features"))?;
    let clusters = cluster(&inputs, &cfg.cluster).map_err(|e| e.in_stage("cluster"))?;
    let tokens = tokens_of(&inputs, &clusters).map_err(|e| e.in_stage("aggregate"))?;
    Ok(Stage1Output { derivatives, semantic: inputs.semantic, spectral: inputs.spectral, clusters, tokens })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{make_synthetic_scene, quadrants, separated_spectra, SceneSpec};

    fn scene() -> HsiCube {
        let spec = SceneSpec {
            height: 32,
            width: 32,
            bands: 12,
            num_classes: 4,
            class_spectra: separated_spectra(4, 12, 1.0, 3).unwrap(),
            noise_sigma: 0.05,
            regions: quadrants(32, 32, [0, 1, 2, 3]),
            seed: 1,
        };
        make_synthetic_scene(&spec).unwrap().0
    }

    #[test]
    fn term_parsing() {
        assert_eq!(parse_terms("first,spectrum").unwrap(), vec![SpectralTerm::Spectrum, SpectralTerm::First]);
        assert!(parse_terms("none").unwrap().is_empty());
        assert!(parse_terms("third").is_err());
    }

    #[test]
    fn token_count_and_determinism() {
        let cube = scene();
        let cfg = Stage1Config {
            cluster: ClusterConfig { grid: 8, per_cell: 4, ..Default::default() },
            ..Default::default()
        };
        let a = run_stage1(&cube, &cfg).unwrap();
        assert_eq!(a.tokens.count, 256);
        assert_eq!(a.tokens.dim, 32);
        assert_eq!(a.spectral.len(), 2);
        assert_eq!(a, run_stage1(&cube, &cfg).unwrap());
    }

    #[test]
    fn second_term_requires_derivative() {
        let cube = scene();
        let cfg = Stage1Config {
            terms: vec![SpectralTerm::Second],
            cluster: ClusterConfig { grid: 4, per_cell: 1, ..Default::default() },
            ..Default::default()
        };
        let out = run_stage1(&cube, &cfg).unwrap();
        assert_eq!(out.derivatives.second_order.as_ref().unwrap().bands(), 10);
    }

    #[test]
    fn stage_errors_are_tagged() {
        let cube = scene();
        let cfg = Stage1Config { step: 12, ..Default::default() };
        let err = run_stage1(&cube, &cfg).unwrap_err().to_string();
        assert!(err.starts_with("stage `derive`"), "{err}");
    }
}
