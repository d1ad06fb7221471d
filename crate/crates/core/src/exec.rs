//! Execution policy for per-particle work.
//!
//! With the `parallel` feature, [`Execution::Parallel`] maps over particles on
//! the ambient rayon pool. Without it, both variants run sequentially. Every
//! per-item closure is a pure function of its index, so both policies produce
//! bit-identical results.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// `(0..n).map(f).collect()` under this policy, preserving index order.
    pub fn map_indexed<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().with_min_len(64).map(f).collect()
            }
            _ => (0..n).map(f).collect(),
        }
    }

    /// Same as [`Execution::map_indexed`] for coarse work items (one per run).
    pub fn map_coarse<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            _ => (0..n).map(f).collect(),
        }
    }
}
