//! Deep representational similarity learning (DRSL).
//!
//! A multi-subject regression `f(x; θ) ≈ d B` where `f` is a per-subject
//! multilayer perceptron, `B` holds one neural signature per stimulus
//! condition, and the signatures are regularized by an elastic
//! `α|β| + 10α β²` penalty. Training alternates SGD steps on `B` with Adam
//! steps on `θ` over random mini-batches of time points, and the group
//! signatures are the subject mean.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command
//! line and thread pools live in the `drsl` companion crate.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`data`] | containers, validation, column standardization, [`FitConfig`] |
//! | [`design`] | HRF and event-table convolution into design matrices |
//! | [`kernel`] | the MLP kernel: init, forward, loss, backprop |
//! | [`optim`] | regularizer, signature gradient, Adam, training loops |
//! | [`baselines`] | GLM (pseudo-inverse), LASSO, linear RSL |
//! | [`eval`] | between-class correlation, MSE, hyperplanes + ECOC, cross-validation |
//! | [`synth`] | synthetic subjects with known signatures |

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod baselines;
pub mod data;
pub mod design;
mod error;
pub mod eval;
pub mod kernel;
pub mod matrix;
pub mod optim;
pub mod parallel;
mod rng;
pub mod stats;
pub mod synth;

pub use data::{DesignMatrix, FitConfig, NetworkParameters, SignatureMatrix, SubjectData};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use optim::{GroupFit, Subject, SubjectFit};
pub use parallel::{Executor, Sequential};
pub use rng::derive_seed;
