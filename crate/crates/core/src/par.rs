//! Data-parallel helpers.
//!
//! With the `parallel` feature the per-file phases run on a rayon pool sized
//! by `worker_count`. Without it (or with `worker_count == 1`) the same code
//! runs as plain sequential iteration.
//!
//! Results are always gathered in input order, so callers see identical
//! output regardless of thread count.

/// Maps `f` over `items` and collects results in input order.
pub fn map_ordered<T, R, F>(workers: usize, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if workers > 1 {
        use rayon::prelude::*;
        return with_pool(workers, || items.par_iter().map(&f).collect());
    }
    let _ = workers;
    items.iter().map(f).collect()
}

/// Folds `items` into per-worker accumulators.
///
/// Each accumulator covers a contiguous, ordered slice of the input and the
/// accumulators are returned in slice order. Concatenating them therefore
/// visits items in input order for every `workers` value.
pub fn fold_chunks<T, A, I, F>(workers: usize, items: &[T], init: I, fold: F) -> Vec<A>
where
    T: Sync,
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(A, &T) -> A + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if workers > 1 {
        use rayon::prelude::*;
        return with_pool(workers, || {
            items.par_iter().fold(&init, &fold).collect::<Vec<A>>()
        });
    }
    let _ = workers;
    vec![items.iter().fold(init(), fold)]
}

#[cfg(feature = "parallel")]
fn with_pool<R: Send>(workers: usize, op: impl FnOnce() -> R + Send) -> R {
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(op),
        Err(err) => {
            tracing::warn!("falling back to the global rayon pool: {err}");
            op()
        }
    }
}

/// Number of logical CPUs, used as the default worker count.
pub fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}
