//! Data-parallel helpers with a sequential fallback.
//!
//! All helpers split work into fixed-size chunks so results are bitwise
//! identical for any thread count, including the sequential build. Reductions
//! always materialize per-chunk results and fold them in index order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk size used when the caller has no better estimate of grain size.
pub const DEFAULT_CHUNK: usize = 1024;

/// Maps `f` over `0..n`, returning results in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Runs `f` over mutable fixed-size chunks of `data`; `f` receives the chunk
/// index and the chunk. Chunk boundaries do not depend on thread count.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    assert!(chunk > 0);
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }
}

/// Maps `f` over fixed-size chunks of `items` and folds the per-chunk results
/// in chunk order with `fold`. Deterministic for any thread count.
pub fn map_chunks<T, R, F>(items: &[T], chunk: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&[T]) -> R + Sync + Send,
{
    assert!(chunk > 0);
    #[cfg(feature = "parallel")]
    {
        items.par_chunks(chunk).map(|c| f(c)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.chunks(chunk).map(|c| f(c)).collect()
    }
}

/// Sum of `f(i)` over `0..n`, accumulated in fixed chunk order.
pub fn sum_indexed<F>(n: usize, chunk: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = n.div_ceil(chunk.max(1));
    let partials = map_indexed(chunks, |c| {
        let lo = c * chunk;
        let hi = (lo + chunk).min(n);
        let mut acc = 0.0;
        for i in lo..hi {
            acc += f(i);
        }
        acc
    });
    partials.into_iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_indexed_orders_results() {
        let v = map_indexed(100, |i| i * 2);
        assert_eq!(v[7], 14);
        assert_eq!(v.len(), 100);
    }

    #[test]
    fn sum_indexed_matches_serial() {
        let s = sum_indexed(1000, 64, |i| i as f64);
        assert_eq!(s, (0..1000).map(|i| i as f64).sum::<f64>());
    }
}
