//! Data-parallel helpers with a sequential fallback.
//!
//! Every hot loop in the crate goes through [`Execution`], so the same code
//! path can be benchmarked sequentially and in parallel. Without the
//! `parallel` feature both modes run sequentially.

use serde::{Deserialize, Serialize};

/// How data-parallel loops are scheduled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when this mode will actually fan out across threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Maps `f` over `items`, preserving order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Maps `f` over `0..len`, preserving order.
    pub fn map_range<R, F>(self, len: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            use rayon::prelude::*;
            return (0..len).into_par_iter().map(f).collect();
        }
        (0..len).map(f).collect()
    }

    /// Runs `f` inside a pool limited to `workers` threads. Sequential mode
    /// (or a build without `parallel`) just calls `f`.
    pub fn with_workers<R: Send>(self, workers: usize, f: impl FnOnce() -> R + Send) -> R {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            match rayon::ThreadPoolBuilder::new()
                .num_threads(workers.max(1))
                .build()
            {
                Ok(pool) => return pool.install(f),
                Err(err) => log::warn!("falling back to the global pool: {err}"),
            }
        }
        let _ = workers;
        f()
    }
}
