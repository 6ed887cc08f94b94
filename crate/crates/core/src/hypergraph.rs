//! Interaction sets, incidence matrices and the user/item hypergraph Laplacians.
//!
//! In the user hypergraph users are nodes and every item is a hyperedge
//! joining the users who interacted with it; the item hypergraph swaps the
//! roles. Both Laplacians have the normalized form
//! `L = I − D^{-1/2} H W Δ^{-1} Hᵀ D^{-1/2}` and are kept as operators.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{SparseBinaryMatrix, SparseSymmetricOperator};

/// Deduplicated positive (user, item) pairs with contiguous indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionSet {
    pairs: Vec<(usize, usize)>,
    user_ids: Vec<String>,
    item_ids: Vec<String>,
}

impl InteractionSet {
    /// Builds a set from external ids. Indices follow the sorted order of the ids.
    pub fn from_records<I, U, T>(records: I) -> Result<Self>
    where
        I: IntoIterator<Item = (U, T)>,
        U: Into<String>,
        T: Into<String>,
    {
        let raw: Vec<(String, String)> =
            records.into_iter().map(|(u, i)| (u.into(), i.into())).collect();
        if raw.is_empty() {
            return Err(Error::EmptyDataset("no interactions".into()));
        }
        let users: BTreeSet<&str> = raw.iter().map(|(u, _)| u.as_str()).collect();
        let items: BTreeSet<&str> = raw.iter().map(|(_, i)| i.as_str()).collect();
        let user_index: BTreeMap<&str, usize> =
            users.iter().enumerate().map(|(i, u)| (*u, i)).collect();
        let item_index: BTreeMap<&str, usize> =
            items.iter().enumerate().map(|(i, u)| (*u, i)).collect();
        let pairs = raw.iter().map(|(u, i)| (user_index[u.as_str()], item_index[i.as_str()])).collect();
        Self::with_ids(
            pairs,
            users.into_iter().map(String::from).collect(),
            items.into_iter().map(String::from).collect(),
        )
    }

    /// Builds a set over `m` users and `n` items with ids `"0".."m-1"` and `"0".."n-1"`.
    pub fn from_indices(m: usize, n: usize, pairs: Vec<(usize, usize)>) -> Result<Self> {
        Self::with_ids(
            pairs,
            (0..m).map(|i| i.to_string()).collect(),
            (0..n).map(|i| i.to_string()).collect(),
        )
    }

    /// Builds a set over explicit id maps. Pairs may leave ids unused.
    pub fn with_ids(
        mut pairs: Vec<(usize, usize)>,
        user_ids: Vec<String>,
        item_ids: Vec<String>,
    ) -> Result<Self> {
        let (m, n) = (user_ids.len(), item_ids.len());
        if let Some(&(u, i)) = pairs.iter().find(|&&(u, i)| u >= m || i >= n) {
            return Err(invalid(format!("pair ({u}, {i}) outside {m} users x {n} items")));
        }
        pairs.sort_unstable();
        pairs.dedup();
        Ok(Self { pairs, user_ids, item_ids })
    }

    /// Same id maps, different pairs.
    pub fn with_pairs(&self, pairs: Vec<(usize, usize)>) -> Result<Self> {
        Self::with_ids(pairs, self.user_ids.clone(), self.item_ids.clone())
    }

    /// Sorted, deduplicated pairs.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn user_ids(&self) -> &[String] {
        &self.user_ids
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn num_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn num_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn user_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.num_users()];
        for &(u, _) in &self.pairs {
            d[u] += 1;
        }
        d
    }

    pub fn item_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.num_items()];
        for &(_, i) in &self.pairs {
            d[i] += 1;
        }
        d
    }

    /// Items of each user, ascending.
    pub fn items_by_user(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_users()];
        for &(u, i) in &self.pairs {
            out[u].push(i);
        }
        out
    }

    /// Drops ids with no pairs and re-indexes the rest, preserving order.
    pub fn compact(&self) -> Result<Self> {
        if self.pairs.is_empty() {
            return Err(Error::EmptyDataset("no interactions left".into()));
        }
        let remap = |degrees: Vec<usize>| -> Vec<Option<usize>> {
            let mut next = 0;
            degrees
                .into_iter()
                .map(|d| {
                    (d > 0).then(|| {
                        next += 1;
                        next - 1
                    })
                })
                .collect()
        };
        let users = remap(self.user_degrees());
        let items = remap(self.item_degrees());
        let user_ids = self
            .user_ids
            .iter()
            .zip(&users)
            .filter_map(|(id, keep)| keep.map(|_| id.clone()))
            .collect();
        let item_ids = self
            .item_ids
            .iter()
            .zip(&items)
            .filter_map(|(id, keep)| keep.map(|_| id.clone()))
            .collect();
        let pairs = self
            .pairs
            .iter()
            .map(|&(u, i)| (users[u].expect("used"), items[i].expect("used")))
            .collect();
        Self::with_ids(pairs, user_ids, item_ids)
    }
}

/// The observed matrix `R` (users × items).
pub fn build_interaction_matrix(interactions: &InteractionSet) -> SparseBinaryMatrix {
    SparseBinaryMatrix::from_pairs(
        interactions.num_users(),
        interactions.num_items(),
        interactions.pairs(),
    )
    .expect("interaction set indices are in range")
}

/// Repeatedly removes users with fewer than `user_core` interactions and
/// items with fewer than `item_core` interactions until nothing changes.
pub fn ncore_filter(
    interactions: &InteractionSet,
    user_core: usize,
    item_core: usize,
) -> Result<InteractionSet> {
    let mut pairs = interactions.pairs().to_vec();
    loop {
        let mut user_deg = vec![0usize; interactions.num_users()];
        let mut item_deg = vec![0usize; interactions.num_items()];
        for &(u, i) in &pairs {
            user_deg[u] += 1;
            item_deg[i] += 1;
        }
        let before = pairs.len();
        pairs.retain(|&(u, i)| user_deg[u] >= user_core && item_deg[i] >= item_core);
        if pairs.len() == before {
            break;
        }
    }
    if pairs.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "nothing survives {user_core}/{item_core}-core filtering"
        )));
    }
    interactions.with_pairs(pairs)?.compact()
}

/// Incidence matrix plus the degree and weight diagonals of a hypergraph.
#[derive(Clone, Debug)]
pub struct HypergraphSpec {
    incidence: SparseBinaryMatrix,
    node_degrees: Vec<f64>,
    edge_weights: Vec<f64>,
    edge_degrees: Vec<f64>,
}

impl HypergraphSpec {
    /// Unit edge weights.
    pub fn new(incidence: SparseBinaryMatrix) -> Result<Self> {
        let weights = vec![1.0; incidence.cols()];
        Self::with_weights(incidence, weights)
    }

    pub fn with_weights(incidence: SparseBinaryMatrix, edge_weights: Vec<f64>) -> Result<Self> {
        Self::build(incidence, edge_weights, "node", "hyperedge")
    }

    fn build(
        incidence: SparseBinaryMatrix,
        edge_weights: Vec<f64>,
        node_name: &'static str,
        edge_name: &'static str,
    ) -> Result<Self> {
        if edge_weights.len() != incidence.cols() {
            return Err(invalid("one weight per hyperedge required"));
        }
        if edge_weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(invalid("hyperedge weights must be positive and finite"));
        }
        let edge_degrees: Vec<f64> = incidence.col_counts().into_iter().map(|c| c as f64).collect();
        let empty_edges: Vec<usize> =
            edge_degrees.iter().enumerate().filter(|(_, d)| **d == 0.0).map(|(i, _)| i).collect();
        if !empty_edges.is_empty() {
            return Err(Error::DegenerateGraph { side: edge_name, ids: empty_edges });
        }
        let node_degrees: Vec<f64> = (0..incidence.rows())
            .map(|r| incidence.row(r).iter().map(|&e| edge_weights[e]).sum())
            .collect();
        let empty_nodes: Vec<usize> =
            node_degrees.iter().enumerate().filter(|(_, d)| **d == 0.0).map(|(i, _)| i).collect();
        if !empty_nodes.is_empty() {
            return Err(Error::DegenerateGraph { side: node_name, ids: empty_nodes });
        }
        Ok(Self { incidence, node_degrees, edge_weights, edge_degrees })
    }

    pub fn incidence(&self) -> &SparseBinaryMatrix {
        &self.incidence
    }

    /// `D_ii = Σ_j W_jj H_ij`.
    pub fn node_degrees(&self) -> &[f64] {
        &self.node_degrees
    }

    pub fn edge_weights(&self) -> &[f64] {
        &self.edge_weights
    }

    /// `Δ_jj = Σ_i H_ij`.
    pub fn edge_degrees(&self) -> &[f64] {
        &self.edge_degrees
    }

    pub fn laplacian(&self) -> SparseSymmetricOperator {
        SparseSymmetricOperator::normalized_hypergraph(self.incidence.clone(), &self.edge_weights)
    }
}

/// Laplacians of the user hypergraph (`H = R`) and the item hypergraph (`H = Rᵀ`).
pub fn user_item_laplacians(
    r: &SparseBinaryMatrix,
) -> Result<(SparseSymmetricOperator, SparseSymmetricOperator)> {
    let users = HypergraphSpec::build(r.clone(), vec![1.0; r.cols()], "user", "item")?;
    let items = HypergraphSpec::build(r.transpose(), vec![1.0; r.rows()], "item", "user")?;
    Ok((users.laplacian(), items.laplacian()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interaction_matrix_transcription() {
        let single = InteractionSet::from_indices(1, 1, vec![(0, 0)]).unwrap();
        assert_eq!(build_interaction_matrix(&single).to_dense(), ndarray::array![[1.0]]);
        let set = InteractionSet::from_indices(2, 2, vec![(0, 0), (0, 1), (1, 0)]).unwrap();
        assert_eq!(build_interaction_matrix(&set).to_dense(), ndarray::array![[1.0, 1.0], [1.0, 0.0]]);
    }

    #[test]
    fn records_sorted_and_deduplicated() {
        let set = InteractionSet::from_records([("b", "x"), ("a", "y"), ("b", "x")]).unwrap();
        assert_eq!(set.user_ids(), &["a", "b"]);
        assert_eq!(set.item_ids(), &["x", "y"]);
        assert_eq!(set.pairs(), &[(0, 1), (1, 0)]);
    }

    #[test]
    fn core_zero_is_noop() {
        let set = InteractionSet::from_indices(3, 2, vec![(0, 0), (1, 1), (2, 0)]).unwrap();
        assert_eq!(ncore_filter(&set, 0, 0).unwrap(), set);
    }

    #[test]
    fn core_hand_example() {
        let set = InteractionSet::from_indices(2, 2, vec![(0, 0), (1, 0), (1, 1)]).unwrap();
        let out = ncore_filter(&set, 2, 1).unwrap();
        assert_eq!(out.pairs(), &[(0, 0), (0, 1)]);
        assert_eq!(out.user_ids(), &["1"]);
        assert_eq!(out.num_items(), 2);
    }

    #[test]
    fn core_filter_empty_result() {
        let set = InteractionSet::from_indices(2, 2, vec![(0, 0), (1, 1)]).unwrap();
        assert!(matches!(ncore_filter(&set, 2, 2), Err(Error::EmptyDataset(_))));
    }

    #[test]
    fn degenerate_rows_named() {
        let r = SparseBinaryMatrix::from_pairs(3, 2, &[(0, 0), (2, 0)]).unwrap();
        match user_item_laplacians(&r) {
            Err(Error::DegenerateGraph { side, ids }) => {
                assert_eq!(side, "item");
                assert_eq!(ids, vec![1]);
            }
            other => panic!("unexpected {other:?}"),
        }
        let r = SparseBinaryMatrix::from_pairs(3, 1, &[(0, 0), (2, 0)]).unwrap();
        match user_item_laplacians(&r) {
            Err(Error::DegenerateGraph { side, ids }) => {
                assert_eq!(side, "user");
                assert_eq!(ids, vec![1]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn two_user_laplacian() {
        let r = SparseBinaryMatrix::from_pairs(2, 2, &[(0, 0), (0, 1), (1, 0)]).unwrap();
        let (lu, _) = user_item_laplacians(&r).unwrap();
        let dense = lu.to_dense().unwrap();
        let off = -0.5f64.sqrt() / 2.0;
        let expected = ndarray::array![[0.25, off], [off, 0.5]];
        for (a, b) in dense.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        let null = lu.apply(&[2f64.sqrt(), 1.0]).unwrap();
        assert!(null.iter().all(|v| v.abs() < 1e-10));
    }
}
