//! Execution strategy for independent per-subject work.
//!
//! The core crate has no threads. Callers that want parallel subject fits
//! supply an [`Executor`]; results always come back in index order, so
//! reductions over them are schedule independent.

use alloc::vec::Vec;

pub trait Executor: Sync {
    /// Evaluates `f(0..n)` and returns the results in index order.
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync;
}

/// Runs everything on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        (0..n).map(f).collect()
    }
}
