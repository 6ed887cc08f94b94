//! Dataset splitting, top-k ranking metrics and the synthetic noise model.

mod metrics;
mod split;
mod synthetic;

pub use metrics::{
    evaluate, f1_at_k, ndcg_at_k, rank_topk, EvalOptions, MetricsReport, Phase, RankedList,
    ScoreSource, STANDARD_KS,
};
pub use split::{split, SplitData, DEFAULT_RATIOS};
pub use synthetic::{generate_synthetic, SyntheticConfig, SyntheticData};
