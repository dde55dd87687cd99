//! Parallel or sequential execution of independent work items.
//!
//! Segment subproblems inside one stitched evaluation, poll batches and scan
//! grids are all embarrassingly parallel. With the `parallel` feature (the
//! default) they run on the rayon pool; without it, or with
//! [`ExecMode::Sequential`], they run on the calling thread. Both paths
//! produce results in input order, so downstream reductions are performed on
//! the collected vector and results are bit-identical regardless of mode.

use serde::{Deserialize, Serialize};

/// How a batch of independent evaluations is dispatched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecMode {
    /// Use the rayon thread pool. Falls back to sequential execution when the
    /// crate is built without the `parallel` feature.
    Parallel,
    /// Run on the calling thread.
    Sequential,
}

impl Default for ExecMode {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            ExecMode::Parallel
        } else {
            ExecMode::Sequential
        }
    }
}

/// Configures the global worker pool size; only meaningful with the
/// `parallel` feature.
#[cfg(feature = "parallel")]
pub fn build_global_pool(threads: usize) -> Result<(), rayon::ThreadPoolBuildError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
}

/// Maps `f` over `items`, returning results in input order.
pub fn map_collect<T, R, F>(mode: ExecMode, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Send + Sync,
{
    match mode {
        ExecMode::Sequential => items.iter().map(f).collect(),
        ExecMode::Parallel => par_map(items, f),
    }
}

/// Maps `f` over indices `0..count`, returning results in input order.
pub fn map_indices<R, F>(mode: ExecMode, count: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Send + Sync,
{
    match mode {
        ExecMode::Sequential => (0..count).map(f).collect(),
        ExecMode::Parallel => par_map_indices(count, f),
    }
}

#[cfg(feature = "parallel")]
fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Send + Sync,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Send + Sync,
{
    items.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
fn par_map_indices<R, F>(count: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Send + Sync,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map_indices<R, F>(count: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Send + Sync,
{
    (0..count).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_preserve_order() {
        let items: Vec<i64> = (0..100).collect();
        let seq = map_collect(ExecMode::Sequential, &items, |x| x * x);
        let par = map_collect(ExecMode::Parallel, &items, |x| x * x);
        assert_eq!(seq, par);
        assert_eq!(seq[7], 49);
    }

    #[test]
    fn index_map_matches_slice_map() {
        let by_index = map_indices(ExecMode::Parallel, 16, |i| 3 * i);
        let expected: Vec<usize> = (0..16).map(|i| 3 * i).collect();
        assert_eq!(by_index, expected);
    }
}
