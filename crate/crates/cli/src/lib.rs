//! Experiment runner for `riccati-geo`: scenario configuration, synthetic
//! truth and measurements, subcommand drivers and CSV/SVG output.

pub mod commands;
pub mod config;
pub mod error;
pub mod generators;
pub mod output;
pub mod svg;
pub mod truth;

/// Sizes the rayon pool from `RICCATI_GEO_THREADS` when set.
pub fn configure_threads() {
    #[cfg(feature = "parallel")]
    if let Some(threads) = std::env::var("RICCATI_GEO_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
}
