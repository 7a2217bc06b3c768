//! Shared fixtures for the benchmarks.

use onc_core::SystemParams;

/// Symmetric instance with `n` buffer slots per source.
pub fn symmetric(n: usize, lambda: f64, d_max: f64) -> SystemParams {
    SystemParams::new(lambda, lambda, n, n, d_max).expect("valid benchmark parameters")
}
