//! Data-parallel helpers. With the `parallel` feature the maps run on the rayon
//! pool; without it they run sequentially. Output order always follows input
//! order, so results never depend on scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items`, preserving order.
pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
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

/// Maps `f` over `0..n`, preserving order.
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
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

/// Sequential reference for [`map`], used by benches and equivalence tests.
pub fn map_sequential<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Runs `f` on a dedicated pool of `threads` workers; `None` uses the global pool.
/// Without the `parallel` feature the thread count is ignored.
pub fn with_threads<R, F>(threads: Option<usize>, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    {
        match threads {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .expect("thread pool")
                .install(f),
            None => f(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_map_matches_sequential() {
        let items: Vec<u64> = (0..1000).collect();
        let f = |x: &u64| crate::rng::derive_seed(*x, &[3]);
        assert_eq!(map(&items, f), map_sequential(&items, f));
        let by_thread: Vec<Vec<u64>> = [1, 2, 4]
            .iter()
            .map(|&t| with_threads(Some(t), || map(&items, f)))
            .collect();
        assert!(by_thread.windows(2).all(|w| w[0] == w[1]));
    }
}
