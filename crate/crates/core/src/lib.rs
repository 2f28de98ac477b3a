//! Machine unlearning by centroid kinematics.
//!
//! The crate trains small feedforward classifiers, removes the influence of a
//! designated forget-set by pulling forget embeddings toward the closest
//! centroid of an incorrect class, and measures the outcome with the Adaptive
//! Unlearning Score and a kernel-SVM membership inference attack.
//!
//! Everything here is pure computation: no file system, no clocks, no threads.
//! The `duck-toolkit` crate layers dataset files, configuration, model caching
//! and reporting on top.

#![no_std]
// `!(x > 0.0)` is how parameter checks reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod baselines;
pub mod data;
pub mod duck;
mod error;
mod math;
pub mod metrics;
pub mod mia;
pub mod nn;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
