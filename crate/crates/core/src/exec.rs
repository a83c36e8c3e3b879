//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the [`Execution::Parallel`] policy
//! runs on the rayon global pool; its size follows `RAYON_NUM_THREADS`.
//! Without the feature every policy runs sequentially. Output order is the
//! input order in both cases, so results are identical.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// Whether work will actually be spread over threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Map `f` over `items`, preserving order.
pub fn map_collect<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Apply `f` to disjoint mutable chunks of `data`, each tagged with its index.
pub fn for_each_chunk_mut<T, F>(exec: Execution, data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let chunk = chunk.max(1);
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && data.len() > chunk {
        use rayon::prelude::*;
        data.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
        return;
    }
    let _ = exec;
    for (i, c) in data.chunks_mut(chunk).enumerate() {
        f(i, c);
    }
}

/// Sum `f(i)` over `0..n` in fixed-size blocks.
///
/// Block partials are combined in index order, so the result does not depend
/// on the policy or the thread count.
pub fn blocked_sum<F>(exec: Execution, n: usize, block: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let block = block.max(1);
    let blocks: Vec<usize> = (0..n.div_ceil(block)).collect();
    let partial = map_collect(exec, &blocks, |&b| {
        let lo = b * block;
        let hi = (lo + block).min(n);
        (lo..hi).map(&f).sum::<f64>()
    });
    partial.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree() {
        let xs: Vec<u64> = (0..1000).collect();
        let a = map_collect(Execution::Sequential, &xs, |x| x * x);
        let b = map_collect(Execution::Parallel, &xs, |x| x * x);
        assert_eq!(a, b);

        let mut u = vec![1.0f64; 1024];
        let mut v = u.clone();
        for_each_chunk_mut(Execution::Sequential, &mut u, 100, |i, c| c.iter_mut().for_each(|x| *x += i as f64));
        for_each_chunk_mut(Execution::Parallel, &mut v, 100, |i, c| c.iter_mut().for_each(|x| *x += i as f64));
        assert_eq!(u, v);

        let f = |i: usize| 1.0 / (1.0 + i as f64);
        let s1 = blocked_sum(Execution::Sequential, 10_000, 64, f);
        let s2 = blocked_sum(Execution::Parallel, 10_000, 64, f);
        assert_eq!(s1.to_bits(), s2.to_bits());
    }
}
