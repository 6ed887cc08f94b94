//! Pairwise ranking training: triple sampling, loss and gradients, Adam,
//! the epoch loop with validation-based model selection, and grid search.

mod adam;
mod fit;
mod objective;
mod sampling;
mod tune;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamState};
pub use fit::{pretrain_mf, train, EpochRecord, TrainOutcome};
pub use objective::{bpr_loss, gradients};
pub use sampling::{sample_triples, EpochSample, Triple};
pub use tune::{coarse_grid, fine_grid, grid_search, tune, CellResult, GridOutcome, FINE_STEPS};

use crate::error::{invalid, Error, Result};
use crate::evaluation::{MetricsReport, STANDARD_KS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MetricKind {
    F1,
    Ndcg,
}

/// A `metric@k` used for model selection, written `F1@2` or `NDCG@10`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SelectionMetric {
    pub kind: MetricKind,
    pub k: usize,
}

impl SelectionMetric {
    pub const F1_AT_2: Self = Self { kind: MetricKind::F1, k: 2 };

    pub fn read(&self, report: &MetricsReport) -> Option<f64> {
        match self.kind {
            MetricKind::F1 => report.f1(self.k),
            MetricKind::Ndcg => report.ndcg(self.k),
        }
    }
}

impl fmt::Display for SelectionMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.kind {
            MetricKind::F1 => "F1",
            MetricKind::Ndcg => "NDCG",
        };
        write!(f, "{name}@{}", self.k)
    }
}

impl FromStr for SelectionMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, k) = s
            .split_once('@')
            .ok_or_else(|| invalid(format!("metric {s:?} is not of the form NAME@k")))?;
        let kind = match name.to_ascii_lowercase().as_str() {
            "f1" => MetricKind::F1,
            "ndcg" => MetricKind::Ndcg,
            _ => return Err(invalid(format!("unknown metric {name:?}"))),
        };
        let k = k.parse().map_err(|_| invalid(format!("bad cut-off in {s:?}")))?;
        if k == 0 {
            return Err(invalid("metric cut-off must be at least 1"));
        }
        Ok(Self { kind, k })
    }
}

impl TryFrom<String> for SelectionMetric {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SelectionMetric> for String {
    fn from(m: SelectionMetric) -> Self {
        m.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub reg_lambda: f64,
    /// Width `K` of every embedding level.
    pub embed_dim: usize,
    pub layers: usize,
    pub cutoff_ratio: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub negatives_per_positive: usize,
    pub seed: u64,
    pub eval_ks: Vec<usize>,
    pub selection_metric: SelectionMetric,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            reg_lambda: 1e-2,
            embed_dim: 64,
            layers: 1,
            cutoff_ratio: 0.005,
            batch_size: 10_000,
            epochs: 200,
            negatives_per_positive: 1,
            seed: 0,
            eval_ks: STANDARD_KS.to_vec(),
            selection_metric: SelectionMetric::F1_AT_2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if !(self.reg_lambda >= 0.0 && self.reg_lambda.is_finite()) {
            return Err(invalid(format!("lambda {} must be non-negative", self.reg_lambda)));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.embed_dim == 0 {
            return Err(invalid("batch size, epochs and embedding width must be at least 1"));
        }
        if self.negatives_per_positive == 0 {
            return Err(invalid("need at least one negative per positive"));
        }
        if !(self.cutoff_ratio > 0.0 && self.cutoff_ratio <= 1.0) {
            return Err(invalid(format!("cutoff ratio {} outside (0, 1]", self.cutoff_ratio)));
        }
        if self.eval_ks.contains(&0) {
            return Err(invalid("evaluation cut-offs must be positive"));
        }
        Ok(())
    }

    /// Evaluation cut-offs with the selection cut-off included, sorted.
    pub fn validation_ks(&self) -> Vec<usize> {
        let mut ks = self.eval_ks.clone();
        ks.push(self.selection_metric.k);
        ks.sort_unstable();
        ks.dedup();
        ks
    }
}
