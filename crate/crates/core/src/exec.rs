//! Data-parallel helpers with a sequential fallback.
//!
//! Work is split into fixed-size chunks whose boundaries do not depend on the
//! thread count. Each chunk is reduced sequentially and the partial results
//! are combined left to right, so floating-point sums come out bit-identical
//! whether or not the `parallel` feature is enabled.

/// Records per reduction chunk.
pub const CHUNK: usize = 256;

/// Maps `f` over `0..n` and collects the results in index order.
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

/// Maps `f` over a slice and collects the results in order.
pub fn map_slice<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    map_indexed(items.len(), |i| f(&items[i]))
}

/// Sums `f(i)` over `0..n` in fixed chunks.
pub fn chunked_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    map_indexed(chunks, |c| {
        let end = ((c + 1) * CHUNK).min(n);
        (c * CHUNK..end).map(&f).sum::<f64>()
    })
    .into_iter()
    .sum()
}

/// Accumulates vector-valued contributions over `0..n` in fixed chunks.
///
/// `accumulate(i, out)` adds the contribution of item `i` into `out`.
pub fn chunked_vec_sum<F>(n: usize, len: usize, accumulate: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    let partials = map_indexed(chunks, |c| {
        let mut acc = vec![0.0; len];
        let end = ((c + 1) * CHUNK).min(n);
        for i in c * CHUNK..end {
            accumulate(i, &mut acc);
        }
        acc
    });
    let mut total = vec![0.0; len];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    total
}
