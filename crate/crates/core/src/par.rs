//! Switch between rayon and plain iterators.
//!
//! Callers pass a runtime `parallel` flag; without the `parallel` feature the
//! flag is ignored and everything runs on the calling thread.

#[cfg(feature = "parallel")]
pub(crate) fn map_mut_collect<T, R, F>(parallel: bool, items: &mut [T], f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(usize, &mut T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    if parallel {
        items.par_iter_mut().enumerate().map(|(i, t)| f(i, t)).collect()
    } else {
        items.iter_mut().enumerate().map(|(i, t)| f(i, t)).collect()
    }
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_mut_collect<T, R, F>(_parallel: bool, items: &mut [T], f: F) -> Vec<R>
where
    F: Fn(usize, &mut T) -> R,
{
    items.iter_mut().enumerate().map(|(i, t)| f(i, t)).collect()
}

#[cfg(feature = "parallel")]
pub(crate) fn map_collect<T, R, F>(parallel: bool, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    if parallel {
        items.par_iter().map(f).collect()
    } else {
        items.iter().map(f).collect()
    }
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_collect<T, R, F>(_parallel: bool, items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}
