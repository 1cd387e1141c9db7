//! Execution strategy for data-parallel loops.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Rows per reduction chunk. Fixed so that summation order does not depend
/// on the number of worker threads.
pub const CHUNK_ROWS: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    /// Rayon-backed when the `parallel` feature is on, sequential otherwise.
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Order-preserving map over `0..n`.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Order-preserving map over a slice.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Splits `0..n` into chunks of `chunk` and maps each `(start, end)`.
    pub fn map_chunks<R, F>(self, n: usize, chunk: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize, usize) -> R + Sync + Send,
    {
        let chunk = chunk.max(1);
        let count = n.div_ceil(chunk);
        self.map_range(count, |c| {
            let start = c * chunk;
            f(start, (start + chunk).min(n))
        })
    }

    /// Order-preserving map on a dedicated pool of at most `workers`
    /// threads. Nested `Exec` calls inside `f` share that pool.
    pub fn map_bounded<T, R, F>(self, items: &[T], workers: usize, f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
                return pool.install(|| items.par_iter().map(&f).collect());
            }
        }
        let _ = workers;
        items.iter().map(f).collect()
    }
}
