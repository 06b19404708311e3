//! Experiment configuration: JSON file blocks merged under command-line
//! flags, with `GDR_SEED` overriding the file's seed.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use gdr_core::{AttackConfig, BallSpec, LikelihoodModel, Metric};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub scenario: Option<String>,
    pub seed: Option<u64>,
    pub out_dir: Option<String>,
    pub ball: Option<BallBlock>,
    pub grid: Option<GridBlock>,
    pub attack: Option<AttackBlock>,
    pub likelihood: Option<LikelihoodModel>,
    pub train: Option<TrainBlock>,
    pub eval: Option<EvalBlock>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallBlock {
    pub xi: f64,
    pub metric: Option<Metric>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub resolution: usize,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackBlock {
    pub alpha: f64,
    pub max_steps: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TrainBlock {
    pub episodes: Option<usize>,
    pub pretrain_episodes: Option<usize>,
    pub replay_capacity: Option<usize>,
    pub batch_size: Option<usize>,
    pub grid_resolution: Option<usize>,
    pub lr_start: Option<f64>,
    pub lr_end: Option<f64>,
    pub eps_start: Option<f64>,
    pub eps_end: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct EvalBlock {
    pub noise_levels: Option<Vec<f64>>,
    pub episodes: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let config: FileConfig = serde_json::from_str(&text)
            .with_context(|| format!("malformed config {}", path.display()))?;
        Ok(config)
    }

    pub fn ball_spec(&self, default_xi: f64) -> BallSpec {
        match self.ball {
            Some(block) => BallSpec::new(block.xi, block.metric.unwrap_or(Metric::SupNorm)),
            None => BallSpec::new(default_xi, Metric::SupNorm),
        }
    }

    pub fn attack_config(&self, seed: u64) -> AttackConfig {
        match self.attack {
            Some(block) => AttackConfig {
                step_size: block.alpha,
                max_steps: block.max_steps,
                seed: block.seed.unwrap_or(seed),
            },
            None => AttackConfig {
                step_size: 0.02,
                max_steps: 50,
                seed,
            },
        }
    }
}

/// Seed precedence: explicit flag, then the GDR_SEED environment variable,
/// then the config file, then zero.
pub fn resolve_seed(flag: Option<u64>, config: &FileConfig) -> Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    if let Ok(text) = std::env::var("GDR_SEED") {
        let parsed = text
            .parse::<u64>()
            .with_context(|| format!("GDR_SEED must be an unsigned integer, got {text:?}"))?;
        return Ok(parsed);
    }
    Ok(config.seed.unwrap_or(0))
}

pub fn resolve_out_dir(flag: Option<PathBuf>, config: &FileConfig) -> PathBuf {
    flag.or_else(|| config.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}
