//! Data-parallel helpers over independent work items.
//!
//! Grid cells, continuation rays, tongue sweeps and periodic-orbit batches
//! are embarrassingly parallel. With the `parallel` feature (default) the
//! default path fans out on the rayon pool; without it the same API runs
//! sequentially. Results are collected in index order either way, so output
//! is identical bit-for-bit across thread counts.

/// Map `f` over `items`, preserving order. Dispatches to rayon when the
/// `parallel` feature is enabled.
pub fn map_collect<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        parallel_map(items, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        sequential_map(items, f)
    }
}

/// Always-sequential path; kept unconditionally compiled so benchmarks can
/// compare against the parallel kernel.
pub fn sequential_map<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    F: Fn(T) -> R,
{
    items.into_iter().map(f).collect()
}

/// Rayon-backed path; only present with the `parallel` feature.
#[cfg(feature = "parallel")]
pub fn parallel_map<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.into_par_iter().map(f).collect()
}

/// Configure the global worker pool size; 0 keeps the library default
/// (all cores). Safe to call more than once — later calls are ignored.
#[cfg(feature = "parallel")]
pub fn configure_jobs(jobs: usize) {
    if jobs > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
}

#[cfg(not(feature = "parallel"))]
pub fn configure_jobs(_jobs: usize) {}
