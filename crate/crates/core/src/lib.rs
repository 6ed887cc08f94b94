//! Spectral collaborative filtering on user/item hypergraphs.
//!
//! The crate turns implicit-feedback interactions into normalized hypergraph
//! Laplacians, computes their low-frequency eigenbases with a Lanczos solver,
//! and uses them for low-pass filtering and for the graph-convolutional
//! recommender trained with a pairwise ranking loss.

pub mod error;
pub mod evaluation;
pub mod hypergraph;
pub mod io;
pub mod linalg;
pub mod model;
pub mod seed;
pub mod spectral;
pub mod training;

pub use error::{Error, Result};
pub use hypergraph::InteractionSet;
pub use model::{ForwardCache, ModelParams};
pub use linalg::{SparseBinaryMatrix, SparseSymmetricOperator, SpectralBasis};
pub use spectral::{SpectralKernel2D, TruncatedBases};
