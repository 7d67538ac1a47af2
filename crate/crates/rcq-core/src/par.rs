//! Data-parallel mapping over batch work items. With the `parallel` feature
//! (default) the work is spread across a rayon pool; without it the same
//! API runs sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items` sequentially. Always available; the benchmark
/// suite compares this against the parallel path.
pub fn map_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_par<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.par_iter().map(f).collect()
}

/// Feature-dispatched map: parallel when compiled in, sequential fallback
/// otherwise. Output order matches input order either way.
pub fn map_auto<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_par(items, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_seq(items, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let items: Vec<u64> = (0..100).collect();
        let seq = map_seq(&items, |x| x * x);
        let auto = map_auto(&items, |x| x * x);
        assert_eq!(seq, auto);
    }
}
