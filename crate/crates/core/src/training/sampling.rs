use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::hypergraph::InteractionSet;

/// User `u` prefers observed item `i` over unobserved item `j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub u: usize,
    pub i: usize,
    pub j: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpochSample {
    pub triples: Vec<Triple>,
    /// Positives dropped because their user has no unobserved item.
    pub skipped: usize,
}

/// One epoch of triples: every positive pair once per negative, in pair order,
/// each paired with a uniformly drawn unobserved item of its user.
pub fn sample_triples<R: Rng + ?Sized>(
    interactions: &InteractionSet,
    negatives_per_positive: usize,
    rng: &mut R,
) -> EpochSample {
    let n = interactions.num_items();
    let by_user = interactions.items_by_user();
    let mut out = EpochSample {
        triples: Vec::with_capacity(interactions.len() * negatives_per_positive),
        skipped: 0,
    };
    let mut complement = Vec::new();
    for (u, items) in by_user.iter().enumerate() {
        if items.is_empty() {
            continue;
        }
        if items.len() >= n {
            out.skipped += items.len() * negatives_per_positive;
            continue;
        }
        // Dense users draw from an explicit complement; sparse users reject.
        let dense = 2 * items.len() > n;
        if dense {
            complement.clear();
            complement.extend((0..n).filter(|j| items.binary_search(j).is_err()));
        }
        for &i in items {
            for _ in 0..negatives_per_positive {
                let j = if dense {
                    complement[rng.random_range(0..complement.len())]
                } else {
                    loop {
                        let j = rng.random_range(0..n);
                        if items.binary_search(&j).is_err() {
                            break j;
                        }
                    }
                };
                out.triples.push(Triple { u, i, j });
            }
        }
    }
    if out.skipped > 0 {
        log::warn!("skipped {} positives of users who interacted with every item", out.skipped);
    }
    out
}
