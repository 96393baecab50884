//! Data-parallel execution with a sequential fallback.
//!
//! With the `parallel` feature (default) and more than one thread requested,
//! work runs on a dedicated rayon pool. Otherwise everything runs on the
//! calling thread. Results are always assembled in index order, so output does
//! not depend on the thread count.

use std::fmt;
#[cfg(feature = "parallel")]
use std::sync::Arc;

#[derive(Clone, Default)]
pub struct Exec {
    #[cfg(feature = "parallel")]
    pool: Option<Arc<rayon::ThreadPool>>,
}

impl fmt::Debug for Exec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Exec")
            .field("threads", &self.threads())
            .finish()
    }
}

impl Exec {
    pub fn serial() -> Self {
        Self::default()
    }

    /// Pool with `threads` workers. Falls back to serial for `threads <= 1`,
    /// without the `parallel` feature, or if the pool cannot be built.
    pub fn with_threads(threads: usize) -> Self {
        #[cfg(feature = "parallel")]
        {
            if threads > 1 {
                if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
                    return Self {
                        pool: Some(Arc::new(pool)),
                    };
                }
            }
        }
        let _ = threads;
        Self::serial()
    }

    pub fn threads(&self) -> usize {
        #[cfg(feature = "parallel")]
        {
            if let Some(pool) = &self.pool {
                return pool.current_num_threads();
            }
        }
        1
    }

    pub fn is_parallel(&self) -> bool {
        self.threads() > 1
    }

    /// `(0..n).map(f).collect()`, in parallel when a pool is present.
    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        {
            if let Some(pool) = &self.pool {
                use rayon::prelude::*;
                return pool.install(|| (0..n).into_par_iter().map(&f).collect());
            }
        }
        (0..n).map(f).collect()
    }

    /// `out[i] = f(i)` for every slot.
    pub fn fill<T, F>(&self, out: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        {
            if let Some(pool) = &self.pool {
                use rayon::prelude::*;
                pool.install(|| {
                    out.par_iter_mut()
                        .enumerate()
                        .with_min_len(64)
                        .for_each(|(i, slot)| *slot = f(i))
                });
                return;
            }
        }
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = f(i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serial_and_parallel_agree() {
        let f = |i: usize| (i as f64).sqrt().sin();
        let a = Exec::serial().map(1000, f);
        let b = Exec::with_threads(4).map(1000, f);
        assert_eq!(a, b);
        let mut c = vec![0.0; 1000];
        Exec::with_threads(3).fill(&mut c, f);
        assert_eq!(a, c);
    }
}
