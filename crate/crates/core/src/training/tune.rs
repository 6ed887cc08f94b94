use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{train, TrainOutcome};
use super::TrainConfig;
use crate::error::{invalid, Error, Result};
use crate::evaluation::SplitData;
use crate::model::Init;
use crate::spectral::TruncatedBases;

const COARSE_RATES: [f64; 3] = [1e-4, 1e-3, 1e-2];
const COARSE_LAMBDAS: [f64; 3] = [1e-3, 1e-2, 1e-1];

/// Multipliers applied to the coarse winner on both axes.
pub const FINE_STEPS: [f64; 5] = [0.2, 0.5, 1.0, 2.0, 5.0];

/// Outcome of one `(η, λ)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub learning_rate: f64,
    pub reg_lambda: f64,
    pub metric_name: String,
    pub metric_value: Option<f64>,
    pub best_epoch: Option<usize>,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct GridOutcome {
    pub best_config: TrainConfig,
    pub best: TrainOutcome,
    /// In grid order.
    pub cells: Vec<CellResult>,
}

/// The `(η, λ)` product of `{1e-4, 1e-3, 1e-2}` and `{1e-3, 1e-2, 1e-1}`.
pub fn coarse_grid() -> Vec<(f64, f64)> {
    COARSE_RATES.iter().flat_map(|&e| COARSE_LAMBDAS.iter().map(move |&l| (e, l))).collect()
}

/// Cells around `(η, λ)`, scaled by [`FINE_STEPS`] on each axis, centre excluded.
pub fn fine_grid(learning_rate: f64, reg_lambda: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(FINE_STEPS.len() * FINE_STEPS.len() - 1);
    for &a in &FINE_STEPS {
        for &b in &FINE_STEPS {
            if a != 1.0 || b != 1.0 {
                out.push((learning_rate * a, reg_lambda * b));
            }
        }
    }
    out
}

/// Higher metric first, then smaller η, then larger λ.
fn better(a: (f64, f64, f64), b: (f64, f64, f64)) -> bool {
    let (ma, ea, la) = a;
    let (mb, eb, lb) = b;
    match ma.partial_cmp(&mb).unwrap_or(Ordering::Equal) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => ea < eb || (ea == eb && la > lb),
    }
}

/// Trains one model per cell and keeps the best by validation metric.
pub fn grid_search(
    base: &TrainConfig,
    cells: &[(f64, f64)],
    split: &SplitData,
    bases: Option<&TruncatedBases>,
    init: &Init,
) -> Result<GridOutcome> {
    if cells.is_empty() {
        return Err(invalid("empty tuning grid"));
    }
    let runs: Vec<(TrainConfig, Result<TrainOutcome>)> = cells
        .par_iter()
        .map(|&(learning_rate, reg_lambda)| {
            let config = TrainConfig { learning_rate, reg_lambda, ..base.clone() };
            let outcome = train(&config, split, bases, init.clone());
            (config, outcome)
        })
        .collect();

    let mut records = Vec::with_capacity(runs.len());
    let mut best: Option<(TrainConfig, TrainOutcome)> = None;
    for (config, outcome) in runs {
        let mut record = CellResult {
            learning_rate: config.learning_rate,
            reg_lambda: config.reg_lambda,
            metric_name: config.selection_metric.to_string(),
            metric_value: None,
            best_epoch: None,
            error: None,
        };
        match outcome {
            Ok(o) => {
                let value = o.best_metric();
                record.metric_value = Some(value);
                record.best_epoch = Some(o.best_epoch);
                let wins = best.as_ref().is_none_or(|(c, b)| {
                    better(
                        (value, config.learning_rate, config.reg_lambda),
                        (b.best_metric(), c.learning_rate, c.reg_lambda),
                    )
                });
                if wins {
                    best = Some((config, o));
                }
            }
            Err(e) => {
                log::warn!("cell η={} λ={} failed: {e}", config.learning_rate, config.reg_lambda);
                record.error = Some(e.to_string());
            }
        }
        records.push(record);
    }
    match best {
        Some((best_config, best)) => Ok(GridOutcome { best_config, best, cells: records }),
        None => Err(Error::TuningFailure(
            records
                .iter()
                .map(|r| {
                    format!(
                        "η={} λ={}: {}",
                        r.learning_rate,
                        r.reg_lambda,
                        r.error.as_deref().unwrap_or("failed")
                    )
                })
                .collect(),
        )),
    }
}

/// Coarse grid, then a fine grid around its winner. Cells of both stages
/// are reported, coarse first.
pub fn tune(
    base: &TrainConfig,
    split: &SplitData,
    bases: Option<&TruncatedBases>,
    init: &Init,
) -> Result<GridOutcome> {
    let coarse = grid_search(base, &coarse_grid(), split, bases, init)?;
    let centre = &coarse.best_config;
    let fine = grid_search(
        base,
        &fine_grid(centre.learning_rate, centre.reg_lambda),
        split,
        bases,
        init,
    );
    let mut cells = coarse.cells;
    let fine = match fine {
        Ok(f) => f,
        Err(Error::TuningFailure(_)) => {
            return Ok(GridOutcome { best_config: coarse.best_config, best: coarse.best, cells })
        }
        Err(e) => return Err(e),
    };
    cells.extend(fine.cells);
    let fine_wins = better(
        (fine.best.best_metric(), fine.best_config.learning_rate, fine.best_config.reg_lambda),
        (coarse.best.best_metric(), centre.learning_rate, centre.reg_lambda),
    );
    Ok(if fine_wins {
        GridOutcome { best_config: fine.best_config, best: fine.best, cells }
    } else {
        GridOutcome { best_config: coarse.best_config, best: coarse.best, cells }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        let c = coarse_grid();
        assert_eq!(c.len(), 9);
        assert_eq!(c[0], (1e-4, 1e-3));
        assert_eq!(c[8], (1e-2, 1e-1));
        let f = fine_grid(1e-3, 1e-2);
        assert_eq!(f.len(), 24);
        assert!(!f.contains(&(1e-3, 1e-2)));
    }

    #[test]
    fn tie_breaking() {
        assert!(better((0.5, 1e-2, 0.1), (0.4, 1e-4, 0.1)));
        assert!(better((0.5, 1e-4, 0.1), (0.5, 1e-3, 0.1)));
        assert!(better((0.5, 1e-3, 0.1), (0.5, 1e-3, 0.01)));
        assert!(!better((0.5, 1e-3, 0.01), (0.5, 1e-3, 0.1)));
    }
}
