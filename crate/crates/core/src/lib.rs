//! Semi-supervised news classification over a Word Mover's Distance k-NN
//! document graph with a graph convolutional network.
//!
//! Pipeline: [`corpus`] (CSV → cleaned documents, splits, label mask) →
//! [`embedding`] (mean word vectors) → [`transport`] (WMD) → [`graph`]
//! (k-NN graph, normalized adjacency) → [`gcn`] (training, prediction) →
//! [`metrics`]. [`pipeline`] stages all of it with on-disk caching.

pub mod corpus;
pub mod embedding;
pub mod error;
pub mod gcn;
pub mod graph;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod synthetic;
pub mod transport;

pub use error::{Error, Result};
