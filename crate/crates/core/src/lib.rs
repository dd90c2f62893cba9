//! Multi-view unsupervised graph embedding.
//!
//! Two feature views feed two separate autoencoders: a node's own features
//! (ego view, linear encoder) and feature averages along random walks of
//! several lengths (aggregated view, two-layer GCN encoder). The merged
//! embedding is additionally trained to reconstruct the adjacency matrix.
//! The crate also ships homophily metrics, a synthetic graph generator with
//! controllable homophily and the downstream evaluation protocols.

pub mod augment;
pub mod error;
pub mod eval;
pub mod graph;
pub mod homophily;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
pub use graph::{Dataset, Graph, Labels, NormalizedAdjacency};
pub use numerics::Matrix;
