//! Flat `key = value` run configuration.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use lcfn_core::evaluation::DEFAULT_RATIOS;
use lcfn_core::training::TrainConfig;

/// Embedding width shared by all levels is `total_dim / (layers + 1)`.
pub const DEFAULT_TOTAL_DIM: usize = 128;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    /// When set, overrides `train.embed_dim` once layers are known.
    pub total_dim: Option<usize>,
    pub core_user: usize,
    pub core_item: usize,
    pub ratios: [f64; 3],
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            total_dim: Some(DEFAULT_TOTAL_DIM),
            core_user: 0,
            core_item: 0,
            ratios: DEFAULT_RATIOS,
        }
    }
}

pub fn parse_list<T: std::str::FromStr>(value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|v| v.trim().parse::<T>().map_err(|_| anyhow!("bad list element {v:?}")))
        .collect()
}

pub fn parse_ratios(value: &str) -> Result<[f64; 3]> {
    let v: Vec<f64> = parse_list(value)?;
    v.try_into().map_err(|v: Vec<f64>| anyhow!("ratios need 3 values, got {}", v.len()))
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| anyhow!("{key}: cannot parse {value:?}"))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut config = Self::default();
        config.apply_text(&text).with_context(|| format!("in config {}", path.display()))?;
        Ok(config)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", n + 1))?;
            self.set(key.trim(), value.trim()).with_context(|| format!("line {}", n + 1))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.train;
        match key {
            "learning_rate" => t.learning_rate = number(key, value)?,
            "reg_lambda" => t.reg_lambda = number(key, value)?,
            "embed_dim" => {
                t.embed_dim = number(key, value)?;
                self.total_dim = None;
            }
            "total_dim" => self.total_dim = Some(number(key, value)?),
            "layers" => t.layers = number(key, value)?,
            "cutoff_ratio" => t.cutoff_ratio = number(key, value)?,
            "batch_size" => t.batch_size = number(key, value)?,
            "epochs" => t.epochs = number(key, value)?,
            "negatives_per_positive" => t.negatives_per_positive = number(key, value)?,
            "seed" => t.seed = number(key, value)?,
            "eval_ks" => t.eval_ks = parse_list(value)?,
            "selection_metric" => t.selection_metric = value.parse()?,
            "core_user" => self.core_user = number(key, value)?,
            "core_item" => self.core_item = number(key, value)?,
            "ratios" => self.ratios = parse_ratios(value)?,
            other => bail!("unknown config key {other:?}"),
        }
        Ok(())
    }

    /// Training configuration with the embedding width resolved.
    pub fn resolved_train(&self) -> Result<TrainConfig> {
        let mut t = self.train.clone();
        if let Some(total) = self.total_dim {
            t.embed_dim = total / (t.layers + 1);
            if t.embed_dim == 0 {
                bail!("total_dim {total} is too small for {} layers", t.layers);
            }
        }
        t.validate()?;
        Ok(t)
    }
}
