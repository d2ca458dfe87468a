//! Minimal dense-tensor library with reverse-mode automatic differentiation.
//!
//! Values live in a [`Tape`] that records every operation of one training
//! step. Trainable parameters are plain [`Tensor`]s owned by the model; they
//! are bound onto a fresh tape each step with [`Tape::param`], and after
//! [`Tape::backward`] their gradients are accumulated back with
//! [`Tape::accumulate_grad`]. [`Adam`] then updates them in place.
//!
//! All arithmetic is `f64`. Matrices are row-major; rank-1 tensors are
//! treated as a single row wherever a row-wise op needs two dimensions.

mod adam;
mod error;
mod gradcheck;
mod ops;
mod sparse;
mod tape;
mod tensor;

pub use adam::Adam;
pub use error::{Result, TensorError};
pub use gradcheck::{grad_check, numeric_grad, relative_error, GRAD_CHECK_FLOOR};
pub use sparse::CsrMatrix;
pub use tape::{Tape, Var};
pub use tensor::Tensor;

/// Epsilon added to the variance inside the square root by [`Tape::layer_norm_rows`].
pub const LAYER_NORM_EPS: f64 = 1e-5;
