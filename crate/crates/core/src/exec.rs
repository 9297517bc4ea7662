//! Execution policy for the data-parallel loops (element assembly, quadrature
//! sums, sweep members).
//!
//! Work is always split into the same fixed chunks and merged in chunk order,
//! so sequential and parallel execution produce bitwise identical results.
//! Without the `parallel` feature, [`Exec::Parallel`] silently runs
//! sequentially.

use std::ops::Range;

/// Default number of items per work chunk.
pub const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
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
    /// Applies `f` to consecutive index ranges of length `chunk` covering
    /// `0..n` and returns the results in range order.
    pub fn map_chunks<T, F>(self, n: usize, chunk: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(Range<usize>) -> T + Sync + Send,
    {
        let chunk = chunk.max(1);
        let n_chunks = n.div_ceil(chunk);
        let range = move |c: usize| c * chunk..((c + 1) * chunk).min(n);
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                (0..n_chunks).into_par_iter().map(|c| f(range(c))).collect()
            }
            _ => (0..n_chunks).map(|c| f(range(c))).collect(),
        }
    }

    /// Maps every item independently, preserving order.
    pub fn map<I, T, F>(self, items: &[I], f: F) -> Vec<T>
    where
        I: Sync,
        T: Send,
        F: Fn(&I) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                items.par_iter().map(f).collect()
            }
            _ => items.iter().map(f).collect(),
        }
    }

    /// Chunked sum; the reduction order is fixed by the chunk layout.
    pub fn sum<F>(self, n: usize, f: F) -> f64
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        self.map_chunks(n, CHUNK, |r| r.map(&f).sum::<f64>())
            .into_iter()
            .sum()
    }
}
