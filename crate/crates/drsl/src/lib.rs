//! Standard-library companion to `drsl-core`: the on-disk dataset format,
//! result tables, a threaded executor and the `drsl` command line.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod gradcheck;
pub mod io;
pub mod results;
pub mod threads;

pub use drsl_core;
