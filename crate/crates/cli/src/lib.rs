//! Scenario runner and figure-data emitter built on `biphoton-core`.

pub mod config;
pub mod error;
pub mod figures;
pub mod output;
pub mod scenario;

/// Environment variable capping the worker-thread count.
pub const THREADS_ENV: &str = "BIPHOTON_SIM_THREADS";

/// Runs `f` on a rayon pool sized by `BIPHOTON_SIM_THREADS` (all cores when unset).
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> error::Result<T> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| error::CliError::config(THREADS_ENV, format!("`{v}` is not a thread count")))?,
        Err(_) => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| error::CliError::config(THREADS_ENV, e.to_string()))?;
    Ok(pool.install(f))
}
