//! Experiment harness: TOML configuration, seeded sweeps with resumable CSV
//! output, summary statistics, SVG charts and the acceptance checks.

pub mod acceptance;
pub mod config_file;
pub mod plot;
pub mod sweep;

pub use config_file::{load_config, load_config_file, parse_config, ConfigFile, SweepDefaults};
pub use plot::emit_plots;
pub use sweep::{
    realization_seed, run_sweep, run_sweep_with_progress, summarize, ResultRow, SummaryRow, SweepOutcome, SweepParam,
    SweepSpec,
};
