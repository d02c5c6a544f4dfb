//! Thread-count control for the data-parallel scans.

use crate::error::{Error, Result};

pub const THREADS_ENV: &str = "OPTD_THREADS";

/// Reads `OPTD_THREADS` and, when set, sizes the global rayon pool to it.
/// Returns the number of threads in use.
pub fn configure_threads() -> Result<usize> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let k: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&k| k > 0)
            .ok_or_else(|| Error::InvalidInput(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        // a pool that is already built keeps its size
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    Ok(rayon::current_num_threads())
}
