//! Ordered map over work items, data-parallel when the `parallel` feature
//! is enabled.
//!
//! Pair judging, claim–source judging, and whole-corpus runs are all
//! independent per item, so they funnel through [`map`]. Output order always
//! matches input order regardless of completion order, which keeps every
//! downstream aggregation bit-stable. `map_seq` (and, with the feature on,
//! `map_par`) expose the two paths explicitly for the benchmark suite.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Apply `f` to every item, in parallel when built with the `parallel`
/// feature, preserving input order in the output.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_par(items, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_seq(items, f)
    }
}

/// Sequential map, always available.
pub fn map_seq<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Explicit rayon map.
#[cfg(feature = "parallel")]
pub fn map_par<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.par_iter().map(f).collect()
}
