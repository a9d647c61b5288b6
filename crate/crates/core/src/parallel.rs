//! Thread pool control. Every experiment in the crate produces the same
//! bytes whatever the worker count, so this only affects speed.

use rayon::ThreadPoolBuilder;

/// Environment variable read for the default worker count.
pub const WORKERS_ENV: &str = "WALKMAX_WORKERS";

/// Worker count from [`WORKERS_ENV`], if set to a positive integer.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&w| w > 0)
}

/// Runs `f` inside a dedicated pool of `workers` threads.
pub fn with_workers<T, F>(workers: usize, f: F) -> T
where
    F: FnOnce() -> T + Send,
    T: Send,
{
    match ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}
