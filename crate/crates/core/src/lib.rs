//! Graph semi-supervised node classification with nonlinear higher-order
//! correct-and-smooth post-processing.
//!
//! Building blocks, bottom up:
//!
//! * [`graph`]: CSR graphs, the normalized adjacency `S`, triangle sets with
//!   hyperdegrees and co-degrees, clustering coefficients;
//! * [`propagation`]: label propagation, the triangle tensor map, and NHOLS;
//! * [`nlcs`]: residual correction and smoothing, linear and nonlinear;
//! * [`base`]: spectral embedding plus linear softmax, and an MLP;
//! * [`data`]: dataset files, stratified splits, experiment configs;
//! * [`eval`]: experiment runs, grid search and analysis exports.

pub mod base;
pub mod data;
pub mod error;
pub mod eval;
pub mod graph;
pub mod linalg;
pub mod matrix;
pub mod nlcs;
pub mod propagation;

pub use error::{Error, Result};
pub use graph::{EdgeRecord, Graph, NormalizedAdjacency, TriangleSet, TriangleWeight};
pub use matrix::ScoreMatrix;
pub use nlcs::{NlcsConfig, Teleport};
pub use propagation::{LabelMatrix, MixingFunction, PropagationParams};
