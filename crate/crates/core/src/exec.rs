//! Work-item execution strategy.
//!
//! Folds, runs and grid cells are independent. The pipeline hands them to an
//! [`Executor`], which must return results in index order regardless of how
//! it schedules them. [`Serial`] is the only strategy available without
//! `std`; the companion crate adds a thread pool.

use alloc::vec::Vec;

pub trait Executor: Sync {
    /// Evaluate `f(0..n)` and return the results in index order.
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Serial;

impl Executor for Serial {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}
