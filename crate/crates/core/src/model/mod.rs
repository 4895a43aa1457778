//! Domain types, channel generation and physical-layer metrics.

mod channel;
mod config;
pub mod metrics;
mod phases;
mod plan;
pub mod rng;

pub use channel::{generate_channels, path_loss, place_users, ChannelSet};
pub use config::{
    db_to_linear, dbm_to_watts, watts_to_dbm, PathLossExponents, PhaseInit, SolverSettings,
    SystemConfig, TimeSearch,
};
pub use metrics::{
    harvested_energy, mse, mmse_receivers, sinr, usable_energy, wmmse_objective, wsr,
};
pub use phases::{project_unit, unit_phases, PhasePlan};
pub use plan::{ActivePlan, KktResiduals, Scheme, SolveReport};

/// Draws user positions and channels for one realization.
pub fn realize(config: &SystemConfig, seed: u64) -> crate::Result<ChannelSet> {
    let positions = place_users(config, seed);
    generate_channels(config, &positions, seed)
}
