//! Thin dispatch layer between the rayon and sequential code paths.
//!
//! Every kernel and enumerator is written against these helpers so that the
//! `parallel` feature flips one switch for the whole crate. Results are
//! identical either way: work is partitioned by output row (or by target
//! node) and each partition keeps a fixed reduction order, so the merged
//! output never depends on the thread count.

/// Apply `f` to each row of a row-major buffer, in parallel when enabled.
pub(crate) fn for_each_row<F>(data: &mut [f64], cols: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    debug_assert!(cols > 0 && data.len() % cols == 0);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        data.par_chunks_mut(cols)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
    }
    #[cfg(not(feature = "parallel"))]
    for_each_row_seq(data, cols, f);
}

/// Sequential twin of [`for_each_row`].
#[cfg(not(feature = "parallel"))]
pub(crate) fn for_each_row_seq<F>(data: &mut [f64], cols: usize, f: F)
where
    F: Fn(usize, &mut [f64]),
{
    debug_assert!(cols > 0 && data.len() % cols == 0);
    for (i, row) in data.chunks_mut(cols).enumerate() {
        f(i, row);
    }
}

/// Map every index in `0..n` to a `Vec` of items and concatenate in index
/// order. Used for per-target enumeration.
pub(crate) fn flat_map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> Vec<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().flat_map_iter(&f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        flat_map_indexed_seq(n, f)
    }
}

/// Sequential twin of [`flat_map_indexed`].
#[cfg(not(feature = "parallel"))]
pub(crate) fn flat_map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> Vec<T>,
{
    (0..n).flat_map(f).collect()
}
