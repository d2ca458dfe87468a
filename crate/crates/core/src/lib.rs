//! Gaussian temporal graph embeddings.
//!
//! Discrete-time dynamic graphs are stored as sequences of snapshots over a
//! persistent node universe. Nodes are embedded as diagonal Gaussians by one
//! of three models (a shared feed-forward encoder, per-timestamp encoders
//! with multi-step warm starts, or a transformer over each node's adjacency
//! history), trained with a KL-divergence triplet loss and evaluated on
//! temporal link prediction.

pub mod analysis;
pub mod error;
pub mod eval;
pub mod graph;
pub mod models;
pub mod rng;
pub mod sampling;

pub use error::{Error, Result};
