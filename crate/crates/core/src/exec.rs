//! Deterministic execution helpers.
//!
//! All data-parallel work in this crate goes through these functions so that
//! the `parallel` feature changes wall-clock time only. Partition boundaries
//! are fixed, work inside a block is sequential, and block results are
//! combined in block order, so results are bitwise identical with the
//! feature on or off.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Block size used for example-indexed aggregation.
pub const BLOCK: usize = 2048;

/// Applies `f` to fixed-size blocks of `items`, returning per-block results
/// in block order.
pub fn map_blocks<T, R, F>(items: &[T], block: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&[T]) -> R + Sync,
{
    assert!(block > 0);
    #[cfg(feature = "parallel")]
    {
        items.par_chunks(block).map(|c| f(c)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.chunks(block).map(|c| f(c)).collect()
    }
}

/// Sequential twin of [`map_blocks`], always available so the two code paths
/// can be benchmarked against each other in one build.
pub fn map_blocks_seq<T, R, F>(items: &[T], block: usize, f: F) -> Vec<R>
where
    F: Fn(&[T]) -> R,
{
    assert!(block > 0);
    items.chunks(block).map(|c| f(c)).collect()
}

/// Applies `f` to every index in `0..n`, returning results in index order.
pub fn map_indices<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(|i| f(i)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Sequential twin of [`map_indices`].
pub fn map_indices_seq<R, F>(n: usize, f: F) -> Vec<R>
where
    F: Fn(usize) -> R,
{
    (0..n).map(f).collect()
}

/// Sums per-example contributions in fixed blocks: sequential within a
/// block, block partials added in block order. The float result does not
/// depend on the `parallel` feature.
pub fn blocked_sum<T, F>(items: &[T], f: F) -> f64
where
    T: Sync,
    F: Fn(&T) -> f64 + Sync,
{
    map_blocks(items, BLOCK, |chunk| {
        let mut acc = 0.0;
        for it in chunk {
            acc += f(it);
        }
        acc
    })
    .into_iter()
    .sum()
}

/// Sequential twin of [`blocked_sum`] with identical partition arithmetic.
pub fn blocked_sum_seq<T, F>(items: &[T], f: F) -> f64
where
    F: Fn(&T) -> f64,
{
    map_blocks_seq(items, BLOCK, |chunk| {
        let mut acc = 0.0;
        for it in chunk {
            acc += f(it);
        }
        acc
    })
    .into_iter()
    .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocked_sum_matches_sequential_partition() {
        let xs: Vec<f64> = (0..10_000).map(|i| (i as f64).sin()).collect();
        let a = blocked_sum(&xs, |v| v * 1.5);
        let b = blocked_sum_seq(&xs, |v| v * 1.5);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn map_indices_preserves_order() {
        let out = map_indices(100, |i| i * i);
        let expected: Vec<usize> = (0..100).map(|i| i * i).collect();
        assert_eq!(out, expected);
    }
}
