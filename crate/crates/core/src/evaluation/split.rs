use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::hypergraph::InteractionSet;

pub const DEFAULT_RATIOS: [f64; 3] = [0.8, 0.1, 0.1];

/// Train / validation / test partition over shared id maps.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitData {
    pub train: InteractionSet,
    pub validation: InteractionSet,
    pub test: InteractionSet,
    pub seed: u64,
    pub ratios: [f64; 3],
}

impl SplitData {
    /// Wraps already-split sets, e.g. when reloading persisted files.
    pub fn from_parts(
        train: InteractionSet,
        validation: InteractionSet,
        test: InteractionSet,
        seed: u64,
    ) -> Result<Self> {
        if train.user_ids() != validation.user_ids()
            || train.user_ids() != test.user_ids()
            || train.item_ids() != validation.item_ids()
            || train.item_ids() != test.item_ids()
        {
            return Err(invalid("split parts must share id maps"));
        }
        let total = (train.len() + validation.len() + test.len()) as f64;
        let ratios = [
            train.len() as f64 / total,
            validation.len() as f64 / total,
            test.len() as f64 / total,
        ];
        Ok(Self { train, validation, test, seed, ratios })
    }

    pub fn num_users(&self) -> usize {
        self.train.num_users()
    }

    pub fn num_items(&self) -> usize {
        self.train.num_items()
    }
}

/// Pre-repair assignment: 0 = train, 1 = validation, 2 = test.
fn assign(total: usize, n_val: usize, n_test: usize, seed: u64) -> Vec<u8> {
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = total - n_val - n_test;
    let mut part = vec![0u8; total];
    for (rank, &idx) in order.iter().enumerate() {
        part[idx] = if rank < n_train {
            0
        } else if rank < n_train + n_val {
            1
        } else {
            2
        };
    }
    part
}

/// Moves the lowest held-out pair of every user, then every item, with no
/// training pair into train. `pairs` must be sorted.
fn repair(pairs: &[(usize, usize)], part: &mut [u8], num_users: usize, num_items: usize) {
    let mut user_train = vec![0usize; num_users];
    let mut item_train = vec![0usize; num_items];
    for (p, &(u, i)) in part.iter().zip(pairs) {
        if *p == 0 {
            user_train[u] += 1;
            item_train[i] += 1;
        }
    }
    // Pairs are sorted by (user, item), so the first hit is the lowest pair.
    for idx in 0..pairs.len() {
        let (u, _) = pairs[idx];
        if part[idx] != 0 && user_train[u] == 0 {
            part[idx] = 0;
            user_train[u] += 1;
            item_train[pairs[idx].1] += 1;
        }
    }
    for idx in 0..pairs.len() {
        let (u, i) = pairs[idx];
        if part[idx] != 0 && item_train[i] == 0 {
            part[idx] = 0;
            item_train[i] += 1;
            user_train[u] += 1;
        }
    }
}

/// Randomly assigns pairs to train/validation/test, then moves one pair back
/// into train for every user or item that lost all training pairs.
pub fn split(interactions: &InteractionSet, ratios: [f64; 3], seed: u64) -> Result<SplitData> {
    if ratios.iter().any(|r| r.is_nan() || *r < 0.0) || ratios[0] <= 0.0 {
        return Err(invalid(format!("bad split ratios {ratios:?}")));
    }
    if (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("split ratios {ratios:?} do not sum to 1")));
    }
    let total = interactions.len();
    if total == 0 {
        return Err(Error::EmptyDataset("nothing to split".into()));
    }
    let n_val = (ratios[1] * total as f64).round() as usize;
    let n_test = (ratios[2] * total as f64).round() as usize;
    if n_val + n_test >= total {
        return Err(Error::SplitFailure(format!("{total} pairs are too few for ratios {ratios:?}")));
    }

    let mut part = assign(total, n_val, n_test, seed);

    let pairs = interactions.pairs();
    repair(pairs, &mut part, interactions.num_users(), interactions.num_items());

    let collect = |which: u8| -> Vec<(usize, usize)> {
        part.iter().zip(pairs).filter(|(p, _)| **p == which).map(|(_, pair)| *pair).collect()
    };
    let (train, val, test) = (collect(0), collect(1), collect(2));
    if (ratios[1] > 0.0 && val.is_empty()) || (ratios[2] > 0.0 && test.is_empty()) {
        return Err(Error::SplitFailure(
            "repair left an empty validation or test set; dataset too small".into(),
        ));
    }
    Ok(SplitData {
        train: interactions.with_pairs(train)?,
        validation: interactions.with_pairs(val)?,
        test: interactions.with_pairs(test)?,
        seed,
        ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ten_pairs() -> InteractionSet {
        let pairs = (0..10).map(|k| (k % 2, k / 2)).collect();
        InteractionSet::from_indices(2, 5, pairs).unwrap()
    }

    #[test]
    fn forced_counts() {
        for seed in 0..20 {
            let part = assign(10, 1, 1, seed);
            let count = |w| part.iter().filter(|p| **p == w).count();
            assert_eq!((count(0), count(1), count(2)), (8, 1, 1));
        }
    }

    #[test]
    fn repair_only_moves_into_train() {
        let set = ten_pairs();
        for seed in 0..20 {
            match split(&set, DEFAULT_RATIOS, seed) {
                Ok(s) => {
                    assert_eq!((s.validation.len(), s.test.len()), (1, 1));
                    assert_eq!(s.train.len(), 8);
                }
                Err(e) => assert!(matches!(e, Error::SplitFailure(_))),
            }
        }
    }

    #[test]
    fn same_seed_same_split() {
        let pairs = (0..200).map(|k| (k % 10, k / 10)).collect();
        let set = InteractionSet::from_indices(10, 20, pairs).unwrap();
        let a = split(&set, DEFAULT_RATIOS, 4).unwrap();
        assert_eq!(a, split(&set, DEFAULT_RATIOS, 4).unwrap());
        assert_ne!(a.test, split(&set, DEFAULT_RATIOS, 5).unwrap().test);
    }

    #[test]
    fn single_pair_user_always_in_train() {
        // user 0 owns one pair; user 1 owns two
        let pairs = [(0, 0), (1, 0), (1, 1)];
        for code in 0..27u32 {
            let mut part: Vec<u8> = (0..3).map(|p| (code / 3u32.pow(p) % 3) as u8).collect();
            repair(&pairs, &mut part, 2, 2);
            assert_eq!(part[0], 0, "assignment {code}");
            for u in 0..2 {
                assert!(pairs.iter().zip(&part).any(|(&(v, _), &p)| v == u && p == 0));
            }
            for i in 0..2 {
                assert!(pairs.iter().zip(&part).any(|(&(_, j), &p)| j == i && p == 0));
            }
        }
    }

    #[test]
    fn bad_ratios() {
        let set = ten_pairs();
        assert!(split(&set, [0.5, 0.1, 0.1], 0).is_err());
        assert!(split(&set, [0.0, 0.5, 0.5], 0).is_err());
        assert!(split(&set, [1.2, -0.1, -0.1], 0).is_err());
    }

    #[test]
    fn too_small_fails() {
        let set = InteractionSet::from_indices(1, 2, vec![(0, 0), (0, 1)]).unwrap();
        assert!(matches!(split(&set, [0.34, 0.33, 0.33], 0), Err(Error::SplitFailure(_))));
    }
}
