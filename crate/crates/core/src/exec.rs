//! Sequential / data-parallel dispatch for the per-cell kernels.
//!
//! Every hot loop in the crate is an "evaluate f at each index, write into a
//! slot" map or a reduction over cells. Those loops go through the helpers
//! here so that the same kernel runs either on the calling thread or on the
//! rayon pool. With the `parallel` feature disabled, [`Execution::Parallel`]
//! quietly runs sequentially.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when work will actually be split across threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// `out[k] = f(k)` for every slot.
pub fn fill<F>(exec: Execution, out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        out.par_iter_mut()
            .enumerate()
            .with_min_len(256)
            .for_each(|(k, o)| *o = f(k));
        return;
    }
    let _ = exec;
    for (k, o) in out.iter_mut().enumerate() {
        *o = f(k);
    }
}

/// Chunked variant of [`fill`]; `f(chunk_index, chunk)` fills one chunk.
pub fn fill_chunks<T, F>(exec: Execution, out: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        out.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(r, c)| f(r, c));
        return;
    }
    let _ = exec;
    for (r, c) in out.chunks_mut(chunk).enumerate() {
        f(r, c);
    }
}

/// `max_k f(k)` over `0..n` (NaN-ignoring), `f64::NEG_INFINITY` when `n == 0`.
pub fn max_over<F>(exec: Execution, n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n)
            .into_par_iter()
            .with_min_len(256)
            .map(&f)
            .reduce(|| f64::NEG_INFINITY, f64::max);
    }
    let _ = exec;
    (0..n).map(f).fold(f64::NEG_INFINITY, f64::max)
}

/// Map every index to a value and collect, preserving order.
pub fn map_collect<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().with_min_len(64).map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}
