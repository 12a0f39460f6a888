//! Thin wrappers around the handful of parallel patterns this crate uses.
//!
//! Only order-independent reductions (max over f64, integer sums) and
//! index-preserving collects are allowed, so results are byte-identical at any
//! thread count. With the `parallel` feature disabled (e.g. for wasm targets)
//! everything runs sequentially with identical results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Max of `f(i)` over `0..n`; `-inf` when `n == 0`. NaNs must not occur.
pub fn map_max(n: usize, f: impl Fn(usize) -> f64 + Sync + Send) -> f64 {
    #[cfg(feature = "parallel")]
    {
        (0..n)
            .into_par_iter()
            .map(f)
            .reduce(|| f64::NEG_INFINITY, f64::max)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Collect `f(i)` for `0..n` preserving index order.
pub fn map_collect<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Fill `data` chunk by chunk; `f` receives the starting element index of the
/// chunk and the chunk itself. Chunk boundaries are fixed by `chunk`,
/// independent of thread count.
pub fn fill_chunks<T: Send>(data: &mut [T], chunk: usize, f: impl Fn(usize, &mut [T]) + Sync + Send) {
    assert!(chunk > 0);
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i * chunk, c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i * chunk, c));
    }
}

