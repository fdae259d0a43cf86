//! Execution mode for the data-parallel loops.
//!
//! Every parallel path produces exactly the same output as the sequential
//! one: work items are independent and results are reduced in index order.
//! Without the `parallel` feature, [`Exec::Parallel`] runs sequentially.

/// How data-parallel loops are executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// Whether this build can actually run loops in parallel.
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }

    /// Map `f` over `0..len`, collecting results in index order.
    pub fn map_indexed<T, F>(self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                (0..len).into_par_iter().map(f).collect()
            }
            _ => (0..len).map(f).collect(),
        }
    }

    /// Lowest index in `0..len` for which `f` returns `Some`, with its value.
    pub fn find_first<T, F>(self, len: usize, f: F) -> Option<(usize, T)>
    where
        T: Send,
        F: Fn(usize) -> Option<T> + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                (0..len)
                    .into_par_iter()
                    .filter_map(|i| f(i).map(|v| (i, v)))
                    .find_first(|_| true)
            }
            _ => (0..len).find_map(|i| f(i).map(|v| (i, v))),
        }
    }
}

/// Configure the global thread pool. Only the first call has an effect.
pub fn init_threads(threads: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        false
    }
}
