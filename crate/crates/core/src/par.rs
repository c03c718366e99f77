//! Data-parallel helpers with a sequential fallback.
//!
//! Work is cut into fixed-size chunks and partial results are combined in
//! chunk order, so both execution modes produce bit-identical output. Without
//! the `parallel` feature, [`Execution::Parallel`] runs sequentially.

use serde::{Deserialize, Serialize};

/// Rows handled per task.
pub const CHUNK: usize = 512;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this build can actually run work concurrently.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// `f(0), .., f(n-1)` in index order.
pub fn map_indexed<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().with_min_len(CHUNK / 8).map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Applies `f` to consecutive index ranges of length [`CHUNK`] and returns the
/// per-chunk results in order.
pub fn map_chunks<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> T + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    map_indexed(exec, chunks, |c| f(c * CHUNK..((c + 1) * CHUNK).min(n)))
}

/// Sums per-chunk vectors of length `len`, in chunk order.
pub fn sum_chunks<F>(exec: Execution, n: usize, len: usize, f: F) -> Vec<f64>
where
    F: Fn(std::ops::Range<usize>, &mut [f64]) + Sync + Send,
{
    let parts = map_chunks(exec, n, |r| {
        let mut acc = vec![0.0; len];
        f(r, &mut acc);
        acc
    });
    let mut total = vec![0.0; len];
    for p in parts {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    total
}
