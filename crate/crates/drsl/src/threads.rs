//! A scoped-thread [`Executor`] whose worker count comes from `DRSL_THREADS`.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use drsl_core::Executor;

pub const THREADS_ENV: &str = "DRSL_THREADS";

/// Work-stealing over an index counter; results are returned in index order,
/// so output never depends on the worker count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Threads {
    workers: usize,
}

impl Threads {
    /// `0` means one worker per available core.
    pub fn new(workers: usize) -> Self {
        let workers = if workers == 0 { std::thread::available_parallelism().map_or(1, |n| n.get()) } else { workers };
        Self { workers }
    }

    /// Reads `DRSL_THREADS`; unset or unparsable values mean auto.
    pub fn from_env() -> Self {
        let n = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse().ok()).unwrap_or(0);
        Self::new(n)
    }

    pub fn workers(&self) -> usize {
        self.workers
    }
}

impl Executor for Threads {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        let workers = self.workers.min(n);
        if workers <= 1 {
            return (0..n).map(f).collect();
        }
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= n {
                        break;
                    }
                    let value = f(i);
                    slots.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(value);
                });
            }
        });
        slots
            .into_inner()
            .unwrap_or_else(|e| e.into_inner())
            .into_iter()
            .map(|v| v.expect("every index is claimed exactly once"))
            .collect()
    }
}
