use std::cmp::Ordering;
use std::collections::BTreeMap;

use ndarray::Array1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::split::SplitData;
use crate::error::{invalid, Error, Result};
use crate::model::{predict_user, ForwardCache};

/// Cut-offs reported for full evaluations.
pub const STANDARD_KS: [usize; 6] = [2, 5, 10, 20, 50, 100];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Validation,
    Test,
}

impl std::str::FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "validation" | "val" => Ok(Self::Validation),
            "test" => Ok(Self::Test),
            other => Err(invalid(format!("unknown phase {other:?}"))),
        }
    }
}

/// Anything that can score every item for a user.
pub trait ScoreSource: Sync {
    fn num_users(&self) -> usize;
    fn num_items(&self) -> usize;
    fn user_scores(&self, u: usize) -> Array1<f64>;
}

impl ScoreSource for ForwardCache {
    fn num_users(&self) -> usize {
        ForwardCache::num_users(self)
    }

    fn num_items(&self) -> usize {
        ForwardCache::num_items(self)
    }

    fn user_scores(&self, u: usize) -> Array1<f64> {
        predict_user(self, u).expect("user index in range")
    }
}

impl ScoreSource for ndarray::Array2<f64> {
    fn num_users(&self) -> usize {
        self.nrows()
    }

    fn num_items(&self) -> usize {
        self.ncols()
    }

    fn user_scores(&self, u: usize) -> Array1<f64> {
        self.row(u).to_owned()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankedList {
    pub items: Vec<usize>,
    /// Fewer than `k` candidates were available.
    pub truncated: bool,
}

/// Top-`k` items by descending score, skipping `exclude` (sorted ascending).
/// Ties go to the lower item index.
pub fn rank_topk(scores: &[f64], exclude: &[usize], k: usize) -> Result<RankedList> {
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    let mut candidates: Vec<usize> =
        (0..scores.len()).filter(|i| exclude.binary_search(i).is_err()).collect();
    let order = |a: &usize, b: &usize| {
        scores[*b].partial_cmp(&scores[*a]).unwrap_or(Ordering::Equal).then(a.cmp(b))
    };
    let truncated = candidates.len() < k;
    if !truncated && candidates.len() > k {
        candidates.select_nth_unstable_by(k - 1, order);
        candidates.truncate(k);
    }
    candidates.sort_by(order);
    Ok(RankedList { items: candidates, truncated })
}

fn hits(recommended: &[usize], relevant: &[usize], k: usize) -> usize {
    recommended.iter().take(k).filter(|i| relevant.binary_search(i).is_ok()).count()
}

/// `2PR/(P+R)` with `P = hits/k` and `R = hits/|relevant|`.
/// `None` when there is nothing relevant. `relevant` must be sorted.
pub fn f1_at_k(recommended: &[usize], relevant: &[usize], k: usize) -> Option<f64> {
    if relevant.is_empty() || k == 0 {
        return None;
    }
    let h = hits(recommended, relevant, k) as f64;
    if h == 0.0 {
        return Some(0.0);
    }
    let precision = h / k as f64;
    let recall = h / relevant.len() as f64;
    Some(2.0 * precision * recall / (precision + recall))
}

/// Binary-gain NDCG with discount `1/log₂(p+1)` for 1-based position `p`.
/// `None` when there is nothing relevant. `relevant` must be sorted.
pub fn ndcg_at_k(recommended: &[usize], relevant: &[usize], k: usize) -> Option<f64> {
    if relevant.is_empty() || k == 0 {
        return None;
    }
    let discount = |pos: usize| 1.0 / ((pos + 2) as f64).log2();
    let dcg: f64 = recommended
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, i)| relevant.binary_search(i).is_ok())
        .map(|(p, _)| discount(p))
        .sum();
    let idcg: f64 = (0..k.min(relevant.len())).map(discount).sum();
    Some(dcg / idcg)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub phase: Phase,
    pub ks: Vec<usize>,
    pub f1: BTreeMap<String, f64>,
    pub ndcg: BTreeMap<String, f64>,
    pub users_included: usize,
    pub seed: u64,
    pub config_digest: String,
}

impl MetricsReport {
    pub fn f1(&self, k: usize) -> Option<f64> {
        self.f1.get(&k.to_string()).copied()
    }

    pub fn ndcg(&self, k: usize) -> Option<f64> {
        self.ndcg.get(&k.to_string()).copied()
    }
}

/// Run metadata copied into the report.
#[derive(Clone, Debug, Default)]
pub struct EvalOptions {
    pub seed: u64,
    pub config_digest: String,
}

/// Averages F1@k and NDCG@k over users with at least one relevant item.
///
/// Candidates exclude the user's training positives, and at test time also
/// the validation positives.
pub fn evaluate(
    source: &dyn ScoreSource,
    split: &SplitData,
    phase: Phase,
    ks: &[usize],
    options: &EvalOptions,
) -> Result<MetricsReport> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(invalid("cut-offs must be non-empty and positive"));
    }
    if source.num_users() != split.num_users() || source.num_items() != split.num_items() {
        return Err(invalid("score source does not match the split dimensions"));
    }
    let target = match phase {
        Phase::Validation => &split.validation,
        Phase::Test => &split.test,
    };
    if target.is_empty() {
        return Err(Error::EvaluationFailure(format!("{phase:?} set is empty")));
    }
    let relevant = target.items_by_user();
    let train = split.train.items_by_user();
    let validation = split.validation.items_by_user();
    let max_k = *ks.iter().max().expect("non-empty");

    let per_user: Vec<Option<Vec<(f64, f64)>>> = (0..split.num_users())
        .into_par_iter()
        .map(|u| {
            if relevant[u].is_empty() {
                return None;
            }
            let mut exclude = train[u].clone();
            if phase == Phase::Test {
                exclude.extend_from_slice(&validation[u]);
                exclude.sort_unstable();
            }
            let scores = source.user_scores(u);
            let ranked = rank_topk(scores.as_slice().expect("contiguous"), &exclude, max_k)
                .expect("k >= 1");
            Some(
                ks.iter()
                    .map(|&k| {
                        let top = &ranked.items[..k.min(ranked.items.len())];
                        (
                            f1_at_k(top, &relevant[u], k).expect("relevant"),
                            ndcg_at_k(top, &relevant[u], k).expect("relevant"),
                        )
                    })
                    .collect(),
            )
        })
        .collect();

    let included: Vec<&Vec<(f64, f64)>> = per_user.iter().flatten().collect();
    let count = included.len();
    let mut f1 = BTreeMap::new();
    let mut ndcg = BTreeMap::new();
    for (slot, &k) in ks.iter().enumerate() {
        let (sf, sn) = included
            .iter()
            .fold((0.0, 0.0), |(a, b), user| (a + user[slot].0, b + user[slot].1));
        f1.insert(k.to_string(), sf / count as f64);
        ndcg.insert(k.to_string(), sn / count as f64);
    }
    Ok(MetricsReport {
        phase,
        ks: ks.to_vec(),
        f1,
        ndcg,
        users_included: count,
        seed: options.seed,
        config_digest: options.config_digest.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranking_examples() {
        let scores = [0.1, 0.9, 0.5];
        assert_eq!(rank_topk(&scores, &[], 2).unwrap().items, vec![1, 2]);
        assert_eq!(rank_topk(&scores, &[1], 2).unwrap().items, vec![2, 0]);
        assert_eq!(rank_topk(&[0.3; 5], &[], 3).unwrap().items, vec![0, 1, 2]);
        let short = rank_topk(&scores, &[0, 1], 2).unwrap();
        assert_eq!(short.items, vec![2]);
        assert!(short.truncated);
        assert!(rank_topk(&scores, &[], 0).is_err());
    }

    #[test]
    fn f1_examples() {
        assert!((f1_at_k(&[0, 1], &[0], 2).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(f1_at_k(&[0, 1], &[2], 2), Some(0.0));
        assert_eq!(f1_at_k(&[3, 4], &[3, 4], 2), Some(1.0));
        assert_eq!(f1_at_k(&[3, 4], &[], 2), None);
    }

    #[test]
    fn ndcg_examples() {
        let v = ndcg_at_k(&[1, 0], &[0], 2).unwrap();
        assert!((v - 1.0 / 3f64.log2()).abs() < 1e-15);
        assert!((v - 0.63093).abs() < 1e-5);
        assert_eq!(ndcg_at_k(&[0, 1], &[0], 2), Some(1.0));
        assert_eq!(ndcg_at_k(&[1, 2], &[0], 2), Some(0.0));
        assert_eq!(ndcg_at_k(&[1], &[], 2), None);
    }

    #[test]
    fn phase_parsing() {
        assert_eq!("test".parse::<Phase>().unwrap(), Phase::Test);
        assert!("train".parse::<Phase>().is_err());
    }
}
