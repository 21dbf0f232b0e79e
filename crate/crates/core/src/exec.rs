//! Index-ordered data-parallel maps.
//!
//! With the `parallel` feature the work runs on rayon; without it every map is
//! a plain sequential loop. Results are always returned in index order, so the
//! output never depends on scheduling.

/// Map `f` over `0..n` on a dedicated pool of `workers` threads.
///
/// `workers <= 1` always runs sequentially on the calling thread.
pub fn map_with_workers<T, F>(n: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if workers > 1 && n > 1 {
            use rayon::prelude::*;
            let threads = workers.min(n);
            match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
                Ok(pool) => return pool.install(|| (0..n).into_par_iter().map(&f).collect()),
                Err(e) => log_pool_failure(&e),
            }
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = workers;
    (0..n).map(f).collect()
}

/// Map `f` over `0..n` on the global pool.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

#[cfg(feature = "parallel")]
fn log_pool_failure(e: &rayon::ThreadPoolBuildError) {
    eprintln!("warning: could not build worker pool ({e}); running sequentially");
}

/// Whether the crate was built with the rayon backend.
pub const fn is_parallel_build() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_is_index_ordered_for_any_worker_count() {
        let seq = map_with_workers(37, 1, |i| i * i);
        for w in [2, 4, 64] {
            assert_eq!(map_with_workers(37, w, |i| i * i), seq);
        }
        assert_eq!(map_indexed(37, |i| i * i), seq);
    }
}
