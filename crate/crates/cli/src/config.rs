//! Run configuration. Every artifact carries the resolved config and its hash.

use std::path::{Path, PathBuf};

use modwatch_core::impact::{ImpactMetric, LshConfig};
use modwatch_core::models::{Hyperparameters, ModelKind, Window};
use modwatch_core::sampling::SamplingStrategy;
use modwatch_core::vectors::VectorKind;
use modwatch_core::YearMonth;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub corpus: CorpusConfig,
    pub sampling: SampleConfig,
    pub distance: DistanceConfig,
    pub features: FeaturesConfig,
    pub model: ModelConfig,
    pub simulate: SimulateConfig,
    pub impact: ImpactConfig,
    pub serve: ServeConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    /// Directory holding `comments.ndjson`, `posts.ndjson`, ... (missing kinds are skipped).
    pub dir: PathBuf,
    pub start: YearMonth,
    pub end: YearMonth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub fraction: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistanceConfig {
    pub kind: VectorKind,
    pub persistence: f64,
    /// Communities compared against the rest in the KS test; empty means
    /// every community with an intervention.
    pub group: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesConfig {
    /// Category lexicon file; the shipped demo lexicon when absent.
    pub lexicon: Option<PathBuf>,
    /// Toxic word list for the default scorer; the shipped list when absent.
    pub toxic_lexicon: Option<PathBuf>,
    pub toxicity_threshold: f64,
    /// `indicator` or `hit_rate`.
    pub scorer_mode: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub window: Window,
    pub sampling: SamplingStrategy,
    pub hyperparameters: Hyperparameters,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub initial_start: YearMonth,
    pub initial_end: YearMonth,
    pub start: YearMonth,
    pub end: YearMonth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImpactConfig {
    pub community: Option<String>,
    pub metric: ImpactMetric,
    /// Months either side of the event.
    pub k: i64,
    pub lsh: LshConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeConfig {
    pub addr: String,
    pub state_dir: PathBuf,
    pub token: Option<String>,
    pub top_factors: usize,
    pub snapshot_every: usize,
}

fn ym(y: i32, m: u32) -> YearMonth {
    YearMonth::new(y, m).expect("valid month")
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            corpus: CorpusConfig::default(),
            sampling: SampleConfig::default(),
            distance: DistanceConfig::default(),
            features: FeaturesConfig::default(),
            model: ModelConfig::default(),
            simulate: SimulateConfig::default(),
            impact: ImpactConfig::default(),
            serve: ServeConfig::default(),
        }
    }
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("data"),
            start: ym(2018, 1),
            end: ym(2019, 12),
        }
    }
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            fraction: 0.1,
            seed: 0,
        }
    }
}

impl Default for DistanceConfig {
    fn default() -> Self {
        Self {
            kind: VectorKind::Vocabulary,
            persistence: 0.98,
            group: Vec::new(),
        }
    }
}

impl Default for FeaturesConfig {
    fn default() -> Self {
        Self {
            lexicon: None,
            toxic_lexicon: None,
            toxicity_threshold: modwatch_core::features::DEFAULT_TOXICITY_THRESHOLD,
            scorer_mode: "indicator".into(),
        }
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Forest,
            window: Window::Total,
            sampling: SamplingStrategy::default(),
            hyperparameters: Hyperparameters::default(),
        }
    }
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            initial_start: ym(2018, 1),
            initial_end: ym(2018, 6),
            start: ym(2018, 7),
            end: ym(2019, 12),
        }
    }
}

impl Default for ImpactConfig {
    fn default() -> Self {
        Self {
            community: None,
            metric: ImpactMetric::HateIncidence,
            k: 6,
            lsh: LshConfig::default(),
        }
    }
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            addr: "127.0.0.1:8080".into(),
            state_dir: PathBuf::from("modwatch-state"),
            token: None,
            top_factors: 5,
            snapshot_every: 20,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut config: Self = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        // relative corpus paths are relative to the config file
        if let Some(base) = path.parent() {
            for p in [
                Some(&mut config.corpus.dir),
                config.features.lexicon.as_mut(),
                config.features.toxic_lexicon.as_mut(),
            ]
            .into_iter()
            .flatten()
            {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(config)
    }

    /// sha256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        format!("{:x}", Sha256::digest(json))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.corpus.start > self.corpus.end {
            return Err(CliError::Config("corpus.start is after corpus.end".into()));
        }
        if !(self.distance.persistence > 0.0 && self.distance.persistence < 1.0) {
            return Err(CliError::Config(format!(
                "distance.persistence {} outside (0, 1)",
                self.distance.persistence
            )));
        }
        if !matches!(self.features.scorer_mode.as_str(), "indicator" | "hit_rate") {
            return Err(CliError::Config(format!(
                "features.scorer_mode {:?}: expected indicator or hit_rate",
                self.features.scorer_mode
            )));
        }
        Ok(())
    }
}

/// Provenance header written into every JSON artifact.
#[derive(Debug, Serialize)]
pub struct Provenance<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub run_config_hash: String,
    pub run_config: &'a RunConfig,
}

impl<'a> Provenance<'a> {
    pub fn new(command: &'a str, config: &'a RunConfig) -> Self {
        Self {
            tool: "modwatch",
            version: env!("CARGO_PKG_VERSION"),
            command,
            run_config_hash: config.hash(),
            run_config: config,
        }
    }
}
