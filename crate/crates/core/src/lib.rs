//! Incremental zero-shot fault diagnosis.
//!
//! Fault categories are described by expert attributes (one-hot coded per
//! attribute group). A diagnosis model maps raw samples to features, predicts
//! attribute logits through a prototype matrix `W`, and classifies by matching
//! against the rows of a category-attribute matrix `A`. Two incremental
//! protocols are supported without storing historical samples:
//!
//! - **category increment**: new categories (rows of `A`) arrive with training
//!   data; `W` is updated by a recursive least-squares rule driven by a memory
//!   matrix `P`, and a conditional feature generator replays past categories.
//! - **attribute increment**: new attribute groups (columns of `A`) arrive with
//!   no data at all; generated features stand in for the vanished training set.
//!
//! The numeric substrate (matrices, reverse-mode tape, MLPs, optimizer) is
//! generic over the scalar type; the crate root fixes `f64` aliases that the
//! domain modules build on.

pub mod attributes;
pub mod error;
pub mod linalg;
pub mod loss;
pub mod matrix;
pub mod memory;
pub mod mlp;
pub mod optim;
pub mod scalar;
pub mod seeds;
pub mod tape;

pub use error::{CoreError, Result};
pub use scalar::Scalar;

/// Dense matrix at the crate's working precision.
pub type Matrix = matrix::DenseMatrix<f64>;
/// Feed-forward network at the crate's working precision.
pub type Mlp = mlp::MlpNet<f64>;
/// Reverse-mode tape at the crate's working precision.
pub type Tape = tape::GradTape<f64>;
/// Adaptive-moment optimizer state at the crate's working precision.
pub type OptimState = optim::AdamState<f64>;
