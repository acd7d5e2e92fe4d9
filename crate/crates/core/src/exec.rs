//! Parallel/sequential execution helpers.
//!
//! Every data-parallel loop in the crate funnels through these functions.
//! Results are always materialized in index order and combined sequentially
//! afterwards, so numeric output is bit-identical whatever the thread count,
//! and identical between the `parallel` build and the sequential fallback.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Samples per chunk when accumulating batch losses and gradients.
pub(crate) const CHUNK: usize = 64;

/// Maps `f` over `0..n`, returning results in index order.
#[cfg(feature = "parallel")]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Maps `f` over `0..n`, returning results in index order.
#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_indexed_seq(n, f)
}

/// Sequential version of [`map_indexed`], always available so benchmarks can
/// compare both paths in one build.
pub(crate) fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Runs two closures, concurrently when the `parallel` feature is on.
#[cfg(feature = "parallel")]
pub(crate) fn join<A, B, RA, RB>(a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA + Send,
    B: FnOnce() -> RB + Send,
    RA: Send,
    RB: Send,
{
    rayon::join(a, b)
}

/// Runs two closures, concurrently when the `parallel` feature is on.
#[cfg(not(feature = "parallel"))]
pub(crate) fn join<A, B, RA, RB>(a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA + Send,
    B: FnOnce() -> RB + Send,
    RA: Send,
    RB: Send,
{
    (a(), b())
}
