//! Thread-pool executor.

use perfpipe_core::Executor;
use rayon::prelude::*;

use crate::error::{CliError, Result};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "PERFPIPE_THREADS";

/// Runs work items on a private rayon pool and returns them in index order.
pub struct Pool {
    pool: rayon::ThreadPool,
}

impl Pool {
    /// A pool of `threads` workers; `None` lets rayon pick one per core.
    pub fn new(threads: Option<usize>) -> Result<Pool> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads {
            if n == 0 {
                return Err(CliError::Usage("thread count must be at least 1".into()));
            }
            b = b.num_threads(n);
        }
        let pool = b.build().map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
        Ok(Pool { pool })
    }

    /// Worker count from `PERFPIPE_THREADS`, unless `threads` overrides it.
    pub fn from_env(threads: Option<usize>) -> Result<Pool> {
        let from_env = match std::env::var(THREADS_ENV) {
            Ok(v) if !v.trim().is_empty() => Some(
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| CliError::Usage(format!("{THREADS_ENV}={v:?} is not a thread count")))?,
            ),
            _ => None,
        };
        Pool::new(threads.or(from_env))
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for Pool {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}
