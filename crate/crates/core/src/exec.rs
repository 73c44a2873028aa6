//! Element-parallel execution with a sequential fallback.
//!
//! All parallel work writes disjoint per-element chunks and any reduction
//! is folded in element order afterwards, so results are bitwise identical
//! for every thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

impl Execution {
    /// True when work will actually be spread over threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Calls `f(chunk_index, chunk)` for every `chunk`-sized piece of `data`.
pub fn for_each_chunk<F>(exec: Execution, data: &mut [f64], chunk: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
        return;
    }
    let _ = exec;
    data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
}

/// Evaluates `f(i)` for `i in 0..count` and returns the results in order.
pub fn map_indices<T, F>(exec: Execution, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..count).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..count).map(f).collect()
}

/// Configures the global worker pool. `None` keeps the library default.
/// Returns the number of workers in effect.
pub fn configure_threads(threads: Option<usize>) -> usize {
    #[cfg(feature = "parallel")]
    {
        if let Some(n) = threads.filter(|n| *n > 0) {
            // a second initialization is harmless; the first one wins
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serial_and_parallel_agree() {
        let mut a: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let mut b = a.clone();
        let f = |i: usize, c: &mut [f64]| c.iter_mut().for_each(|v| *v = (*v * 1.1 + i as f64).sin());
        for_each_chunk(Execution::Serial, &mut a, 7, f);
        for_each_chunk(Execution::Parallel, &mut b, 7, f);
        assert_eq!(a, b);
        let s = map_indices(Execution::Serial, 50, |i| i * i);
        let p = map_indices(Execution::Parallel, 50, |i| i * i);
        assert_eq!(s, p);
    }
}
