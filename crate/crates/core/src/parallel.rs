use rayon::prelude::*;

/// Apply `f` to every element on a pool of `threads` workers.
///
/// Output order matches input order. `threads <= 1` runs inline.
pub fn par_map<T: Sync, R: Send, E: Send>(items: &[T], threads: usize, f: impl Fn(usize, &T) -> Result<R, E> + Sync + Send) -> Result<Vec<R>, E> {
    if threads <= 1 || items.len() <= 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(|| items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()),
        Err(_) => items.iter().enumerate().map(|(i, t)| f(i, t)).collect(),
    }
}

/// Worker count from `available_parallelism`, at least 1.
pub fn default_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}
