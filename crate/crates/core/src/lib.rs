//! Model-aware rate-distortion bounds for task-oriented source coding.
//!
//! The crate computes, for a classification task model described by its confusion
//! matrix or its logits, the rate needed to convey enough about an observation for a
//! receiver to recover the task label within a target error probability:
//!
//! - [`prob`]: pmfs, entropies and the closed-form Hamming rate-distortion functions;
//! - [`ba`]: the Blahut–Arimoto solver and multiplier sweeps;
//! - [`classify`]: estimate-and-compress, indirect estimate-and-compress, time-sharing
//!   and merge-k curves derived from a confusion matrix, plus the oracle curve;
//! - [`gmm`]: the binary Gaussian-mixture example with all four reference curves;
//! - [`snc`]: the sample-and-communicate estimator over logits datasets;
//! - [`io`]: the CSV interchange formats.

pub mod ba;
pub mod classify;
pub mod curve;
pub mod error;
pub mod gmm;
pub mod io;
pub mod prob;
pub mod snc;

pub use ba::{ba_point, ba_sweep, ba_sweep_results, BaConfig, BaResult};
pub use curve::{LambdaGrid, RdCurve, RdPoint};
pub use error::{Error, Result};
pub use prob::{
    binary_entropy, entropy_bits, rd_binary, rd_uniform_classes, Channel, DistortionMatrix, Pmf,
};
