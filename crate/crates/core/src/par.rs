// Row/column map helpers that use rayon when the `parallel` feature is on.
// Every call produces the same output regardless of the thread count:
// items are computed independently and collected in index order.

use alloc::vec::Vec;

#[cfg(feature = "parallel")]
pub(crate) fn map_range<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..len).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_range<T, F>(len: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..len).map(f).collect()
}

/// Builds a `width * height` row-major buffer by evaluating `row_fn` per row.
pub(crate) fn map_rows<T, F>(height: usize, row_fn: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> Vec<T> + Sync + Send,
{
    map_range(height, row_fn).into_iter().flatten().collect()
}
