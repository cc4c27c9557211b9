//! Unsupervised node anomaly detection driven by graph smoothing patterns.
//!
//! The crate is organized bottom-up:
//!
//! * [`graph`]: sparse graphs and the propagation, Laplacian and augmented
//!   propagation operators;
//! * [`analysis`]: distance-to-convergence curves,
//!   Dirichlet and spectral energy, the ε-smoothing hop bound and the
//!   personalized-PageRank (APPNP) smoothing variant;
//! * [`nn`]: a small dense MLP kernel with Adam and a gradient checker;
//! * [`model`]: the smoothing learning component, the smoothing-aware
//!   spectral GNN, smoothing coefficients, the smoothness measure and loss;
//! * [`trainer`]: full-batch training, scoring and checkpoints;
//! * [`data`]: dataset directories, score files and a synthetic
//!   anomaly-injected graph generator;
//! * [`eval`]: AUC and precision@k;
//! * [`verify`]: the executable oracle suite behind `smoothgnn verify`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod data;
pub mod error;
pub mod eval;
pub mod graph;
pub mod model;
pub mod nn;
pub mod trainer;
pub mod verify;

pub use error::{Error, Result};
