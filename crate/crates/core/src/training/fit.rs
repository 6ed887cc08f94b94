use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::objective::loss_and_gradients;
use super::sampling::sample_triples;
use super::TrainConfig;
use crate::error::{invalid, Error, Result};
use crate::evaluation::{evaluate, EvalOptions, MetricsReport, Phase, SplitData};
use crate::model::{init_params, lcfn_forward, Init, ModelParams};
use crate::seed;
use crate::spectral::TruncatedBases;

/// One line of the training history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub metric_name: String,
    pub metric_value: f64,
    pub wall_ms: u64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters of the epoch with the best validation metric.
    pub params: ModelParams,
    pub best_epoch: usize,
    pub best_report: MetricsReport,
    pub history: Vec<EpochRecord>,
    /// Optimizer updates applied, counting retried epochs once.
    pub steps: u64,
    /// Learning rate in force at the end; halved once on divergence.
    pub final_learning_rate: f64,
    /// Set when a second divergence stopped training early.
    pub aborted: Option<String>,
}

impl TrainOutcome {
    pub fn best_metric(&self) -> f64 {
        self.history[self.best_epoch - 1].metric_value
    }
}

struct Session<'a> {
    config: &'a TrainConfig,
    split: &'a SplitData,
    bases: Option<&'a TruncatedBases>,
}

impl Session<'_> {
    /// Runs one epoch of mini-batch updates; returns the mean batch objective
    /// and the number of updates.
    fn epoch(
        &self,
        epoch: usize,
        params: &mut ModelParams,
        adam: &mut AdamState,
        learning_rate: f64,
    ) -> Result<(f64, u64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::indexed(
            self.config.seed,
            seed::SAMPLER,
            epoch as u64,
        ));
        let mut sample = sample_triples(&self.split.train, self.config.negatives_per_positive, &mut rng);
        sample.triples.shuffle(&mut rng);
        let mut total = 0.0;
        let mut steps = 0;
        for batch in sample.triples.chunks(self.config.batch_size) {
            let (loss, grads) = loss_and_gradients(params, self.bases, batch, self.config.reg_lambda)?;
            adam_step(adam, params, &grads, learning_rate)?;
            total += loss;
            steps += 1;
        }
        if !params.is_finite() {
            return Err(Error::NumericOverflow(format!("parameters after epoch {epoch}")));
        }
        Ok((if steps == 0 { 0.0 } else { total / steps as f64 }, steps))
    }

    fn validate(&self, params: &ModelParams) -> Result<MetricsReport> {
        let cache = lcfn_forward(params, self.bases)?;
        let options = EvalOptions { seed: self.config.seed, config_digest: String::new() };
        evaluate(&cache, self.split, Phase::Validation, &self.config.validation_ks(), &options)
    }
}

/// Trains from `init` for `config.epochs` epochs and keeps the parameters
/// that score best on the validation split.
///
/// A non-finite loss halves the learning rate and retries the epoch from its
/// starting point; a second occurrence ends training with the best
/// parameters so far.
pub fn train(
    config: &TrainConfig,
    split: &SplitData,
    bases: Option<&TruncatedBases>,
    init: Init,
) -> Result<TrainOutcome> {
    config.validate()?;
    let passband = match (config.layers, bases) {
        (0, _) => (0, 0),
        (_, Some(b)) => b.passband(),
        (_, None) => return Err(invalid("graph layers need spectral bases")),
    };
    let bases = if config.layers == 0 { None } else { bases };
    if split.train.is_empty() {
        return Err(Error::EmptyDataset("training split".into()));
    }
    let mut params = init_params(
        split.num_users(),
        split.num_items(),
        config.embed_dim,
        config.layers,
        passband,
        seed::substream(config.seed, seed::INIT),
        init,
    )?;
    params.validate(bases)?;
    let session = Session { config, split, bases };
    let mut adam = AdamState::new(&params);
    let mut learning_rate = config.learning_rate;
    let mut halved = false;
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, ModelParams, MetricsReport)> = None;
    let mut steps = 0;
    let mut aborted = None;

    'epochs: for epoch in 1..=config.epochs {
        let started = Instant::now();
        let (start_params, start_adam) = (params.clone(), adam.clone());
        let (loss, report) = loop {
            let attempt = session
                .epoch(epoch, &mut params, &mut adam, learning_rate)
                .and_then(|(loss, n)| Ok((loss, n, session.validate(&params)?)));
            match attempt {
                Ok((loss, n, report)) => {
                    steps += n;
                    break (loss, report);
                }
                Err(Error::NumericOverflow(what)) if !halved => {
                    halved = true;
                    learning_rate /= 2.0;
                    log::warn!("epoch {epoch} diverged ({what}); retrying with learning rate {learning_rate}");
                    params = start_params.clone();
                    adam = start_adam.clone();
                }
                Err(Error::NumericOverflow(what)) => {
                    log::error!("epoch {epoch} diverged again ({what}); stopping");
                    aborted = Some(format!("epoch {epoch}: {what}"));
                    break 'epochs;
                }
                Err(e) => return Err(e),
            }
        };
        let value = config
            .selection_metric
            .read(&report)
            .ok_or_else(|| invalid(format!("report lacks {}", config.selection_metric)))?;
        history.push(EpochRecord {
            epoch,
            loss,
            metric_name: config.selection_metric.to_string(),
            metric_value: value,
            wall_ms: started.elapsed().as_millis() as u64,
        });
        log::info!("epoch {epoch}: loss {loss:.6} {} {value:.5}", config.selection_metric);
        let improved = best
            .as_ref()
            .is_none_or(|(e, _, _)| value > history[*e - 1].metric_value);
        if improved {
            best = Some((epoch, params.clone(), report));
        }
    }

    let (best_epoch, params, best_report) = best.ok_or_else(|| {
        Error::NumericOverflow(aborted.clone().unwrap_or_else(|| "no epoch completed".into()))
    })?;
    Ok(TrainOutcome {
        params,
        best_epoch,
        best_report,
        history,
        steps,
        final_learning_rate: learning_rate,
        aborted,
    })
}

/// Plain matrix factorization (no graph layers) trained with the same loop;
/// returns the best-validation user and item embeddings.
pub fn pretrain_mf(config: &TrainConfig, split: &SplitData) -> Result<(Array2<f64>, Array2<f64>)> {
    let mf = TrainConfig { layers: 0, ..config.clone() };
    let outcome = train(&mf, split, None, Init::Random)?;
    Ok((outcome.params.u0, outcome.params.v0))
}
