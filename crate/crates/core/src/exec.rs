//! Execution policy for the data-parallel loops.
//!
//! Every parallel loop here is elementwise (one output slot per index, no
//! reductions), so sequential and parallel execution produce bit-identical
//! results. Without the `parallel` feature, `Execution::Parallel` falls back
//! to the sequential path.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

/// Below this many output slots the per-cell loops stay sequential.
pub const PAR_MIN_LEN: usize = 2048;

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Writes `f(i)` into `out[i]` for every `i`.
    pub fn fill<F>(self, out: &mut [f64], f: F)
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() && out.len() >= PAR_MIN_LEN {
            use rayon::prelude::*;
            out.par_iter_mut()
                .enumerate()
                .with_min_len(PAR_MIN_LEN / 2)
                .for_each(|(i, o)| *o = f(i));
            return;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o = f(i);
        }
    }

    /// Maps `f` over independent jobs, keeping input order in the output.
    pub fn map<T, R, F>(self, jobs: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return jobs.par_iter().map(f).collect();
        }
        jobs.iter().map(f).collect()
    }
}

/// Runs `f` inside a pool of `threads` workers (0 = rayon default).
#[cfg(feature = "parallel")]
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    if threads == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_threads<R: Send>(_threads: usize, f: impl FnOnce() -> R + Send) -> R {
    f()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fill_matches_between_policies() {
        let f = |i: usize| (i as f64 * 0.37).sin();
        let mut a = vec![0.0; 10_000];
        let mut b = vec![0.0; 10_000];
        Execution::Sequential.fill(&mut a, f);
        Execution::Parallel.fill(&mut b, f);
        assert_eq!(a, b);
    }

    #[test]
    fn map_keeps_order() {
        let jobs: Vec<usize> = (0..100).collect();
        let out = Execution::Parallel.map(&jobs, |&j| j * 2);
        assert_eq!(out, (0..100).map(|j| j * 2).collect::<Vec<_>>());
    }
}
