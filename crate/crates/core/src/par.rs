//! Order-preserving data parallelism with a sequential fallback.
//!
//! Parallelism is restricted to elementwise maps whose outputs are collected
//! in input order; every reduction downstream runs sequentially over that
//! ordered buffer. Consequently results are byte-identical whatever the
//! thread count, and identical between the `parallel` feature and the
//! sequential fallback.

/// Map `f` over `items`, preserving order. Runs on the rayon pool when the
/// `parallel` feature is enabled, otherwise sequentially.
pub fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Always-sequential variant, kept for direct comparison in benchmarks.
pub fn map_slice_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Run `f` on a scoped pool with the requested number of threads. With the
/// sequential fallback (or `threads == Some(1)` semantics aside) the closure
/// simply runs on the calling thread.
pub fn run_with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads {
            builder = builder.num_threads(n);
        }
        let pool = builder.build().expect("failed to build thread pool");
        pool.install(f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}
