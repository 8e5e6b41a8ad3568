//! Parallel map/reduce helpers with an ordered mode.
//!
//! In ordered mode work is split into fixed-size chunks whose partial
//! results are combined by a pairwise tree in index order, so the result is
//! bit-identical regardless of the number of worker threads.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub const CHUNK: usize = 512;

/// Sums `f(item)` over `items`. `zero` must be the additive identity.
pub fn sum_by<T, A, F, C>(items: &[T], ordered: bool, zero: A, f: F, combine: C) -> A
where
    T: Sync,
    A: Clone + Send + Sync,
    F: Fn(&mut A, &T) + Sync + Send,
    C: Fn(A, A) -> A + Sync,
{
    let fold_chunk = |chunk: &[T]| {
        let mut acc = zero.clone();
        for item in chunk {
            f(&mut acc, item);
        }
        acc
    };
    if ordered {
        let partials = map_chunks(items, CHUNK, fold_chunk);
        tree_reduce(partials, &combine).unwrap_or(zero)
    } else {
        #[cfg(feature = "parallel")]
        {
            items
                .par_iter()
                .fold(
                    || zero.clone(),
                    |mut acc, item| {
                        f(&mut acc, item);
                        acc
                    },
                )
                .reduce(|| zero.clone(), &combine)
        }
        #[cfg(not(feature = "parallel"))]
        {
            fold_chunk(items)
        }
    }
}

/// Applies `f` to consecutive chunks, preserving chunk order in the output.
pub fn map_chunks<T, R, F>(items: &[T], chunk: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&[T]) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_chunks(chunk.max(1)).map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.chunks(chunk.max(1)).map(f).collect()
    }
}

/// Order-preserving parallel map.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Order-preserving parallel map over an index range.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
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

/// Pairwise reduction with a fixed combination order.
pub fn tree_reduce<A, C>(mut items: Vec<A>, combine: &C) -> Option<A>
where
    C: Fn(A, A) -> A,
{
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut it = items.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(combine(a, b)),
                None => next.push(a),
            }
        }
        items = next;
    }
    items.pop()
}
