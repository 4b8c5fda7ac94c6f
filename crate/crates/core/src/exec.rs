//! Execution policy for the data-parallel loops (per-ray rendering, per-pixel
//! phase retrieval, per-point reconstruction, Monte-Carlo trials).

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How batch operations are scheduled.
///
/// Results never depend on the policy: every batch operation is an indexed
/// map whose output order is the input order, and randomness is keyed by
/// index rather than by thread.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        {
            Exec::Parallel
        }
        #[cfg(not(feature = "parallel"))]
        {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// Builds `(0..n).map(f)` under this policy.
    pub fn map_range<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Send + Sync,
    {
        match self {
            Exec::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel => (0..n).into_par_iter().map(f).collect(),
        }
    }

    pub fn map_slice<'a, S, T, F>(self, items: &'a [S], f: F) -> Vec<T>
    where
        S: Sync,
        T: Send,
        F: Fn(&'a S) -> T + Send + Sync,
    {
        match self {
            Exec::Sequential => items.iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel => items.par_iter().map(f).collect(),
        }
    }

    /// Applies `f` to consecutive chunks of `out`, passing the index of each
    /// chunk's first element.
    pub fn for_chunks_mut<T, F>(self, out: &mut [T], chunk: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Send + Sync,
    {
        let chunk = chunk.max(1);
        match self {
            Exec::Sequential => out
                .chunks_mut(chunk)
                .enumerate()
                .for_each(|(i, c)| f(i * chunk, c)),
            #[cfg(feature = "parallel")]
            Exec::Parallel => out
                .par_chunks_mut(chunk)
                .enumerate()
                .for_each(|(i, c)| f(i * chunk, c)),
        }
    }
}
