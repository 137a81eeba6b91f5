//! Worker dispatch. With the `parallel` feature the helpers run on rayon
//! pools; without it they degrade to plain sequential loops with identical
//! results.

#[cfg(feature = "parallel")]
mod imp {
    use std::collections::HashMap;
    use std::sync::{Arc, Mutex, OnceLock};

    use rayon::prelude::*;
    use rayon::{ThreadPool, ThreadPoolBuilder};

    fn pool(workers: usize) -> Arc<ThreadPool> {
        static POOLS: OnceLock<Mutex<HashMap<usize, Arc<ThreadPool>>>> = OnceLock::new();
        let mut pools = POOLS.get_or_init(Default::default).lock().unwrap();
        pools
            .entry(workers)
            .or_insert_with(|| {
                Arc::new(
                    ThreadPoolBuilder::new()
                        .num_threads(workers)
                        .thread_name(|i| format!("biqgemm-{i}"))
                        .build()
                        .expect("failed to build worker pool"),
                )
            })
            .clone()
    }

    pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
        if workers <= 1 {
            f()
        } else {
            pool(workers).install(f)
        }
    }

    pub fn map_collect<I: Sync, O: Send>(items: &[I], f: impl Fn(&I) -> O + Sync + Send) -> Vec<O> {
        items.par_iter().map(f).collect()
    }

    pub fn for_each_chunk_mut<T: Send>(
        data: &mut [T],
        chunk: usize,
        parallel: bool,
        f: impl Fn(usize, &mut [T]) + Sync + Send,
    ) {
        if parallel {
            data.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
        } else {
            data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
        }
    }

    pub const ENABLED: bool = true;
}

#[cfg(not(feature = "parallel"))]
mod imp {
    pub fn with_workers<R: Send>(_workers: usize, f: impl FnOnce() -> R + Send) -> R {
        f()
    }

    pub fn map_collect<I: Sync, O: Send>(items: &[I], f: impl Fn(&I) -> O + Sync + Send) -> Vec<O> {
        items.iter().map(f).collect()
    }

    pub fn for_each_chunk_mut<T: Send>(
        data: &mut [T],
        chunk: usize,
        _parallel: bool,
        f: impl Fn(usize, &mut [T]) + Sync + Send,
    ) {
        data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }

    pub const ENABLED: bool = false;
}

/// Runs `f` on a pool of `workers` threads (inline when `workers <= 1`).
pub use imp::with_workers;

/// Order-preserving map over a slice.
pub use imp::map_collect;

/// Calls `f(chunk_index, chunk)` for each `chunk`-sized piece of `data`.
pub use imp::for_each_chunk_mut;

/// Whether the crate was built with rayon support.
pub const PARALLEL_ENABLED: bool = imp::ENABLED;
