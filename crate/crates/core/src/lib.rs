//! Dense neural networks trained from scratch, regularized by a dropout mask
//! that evolves under Conway's Game of Life.
//!
//! - [`lattice`]: the binary grid used as the dropout mask (one row per hidden
//!   layer, one column per unit), its generation rule and reactivation.
//! - [`nn`]: matrices, dense layers, softmax/cross-entropy, hand-written
//!   backpropagation and plain SGD.
//! - [`regularizers`]: classical, Gaussian and alpha dropout baselines, the
//!   lattice-driven dynamic dropout, and the stagnation monitor.
//! - [`data`]: CIFAR-10 binary ingestion, synthetic blobs, seeded batching.
//! - [`harness`]: the training loop, metrics, manifests and run comparison.

pub mod data;
pub mod error;
pub mod harness;
pub mod lattice;
pub mod nn;
pub mod regularizers;
pub mod seed;

pub use error::{Error, Result};
pub use lattice::{CellCoord, Lattice};
pub use nn::{Matrix, Network};
