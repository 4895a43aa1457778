//! Joint beamforming and power control for IRS-assisted multiuser MISO
//! wireless-powered communication networks.
//!
//! A hybrid access point (HAP) with `M` antennas first beams energy to `K`
//! single-antenna devices for a fraction `t` of each block, then receives
//! their simultaneous uplink transmissions for the remaining `1 - t`. An
//! intelligent reflecting surface with `N` passive elements reshapes both
//! phases. The crate maximizes the weighted sum rate over the energy
//! beamformer, receive beamformers, device powers, both reflection vectors
//! and the time split.
//!
//! Layout:
//! - [`model`]: configuration, channel generation and physical-layer metrics.
//! - [`numerics`]: Hermitian eigensolver, ellipsoid method, golden-section search.
//! - [`sdp`]: dense primal-dual interior-point solver for complex Hermitian SDPs.
//! - [`active`]: WMMSE block-coordinate descent for the HAP/device variables.
//! - [`passive`]: semidefinite relaxation and Gaussian randomization for the
//!   reflection vectors.
//! - [`orchestrator`]: alternating optimization, time-split search and the
//!   benchmark schemes.
//! - [`experiments`]: config files, seeded sweeps, CSV output and SVG plots.

pub mod active;
pub mod error;
pub mod experiments;
pub mod model;
pub mod numerics;
pub mod orchestrator;
pub mod par;
pub mod passive;
pub mod sdp;

pub use error::{Error, Result};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Dense complex matrix.
pub type CMat = DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVec = DVector<Complex64>;

pub use active::{solve_p3, ActiveOutcome, ActiveSubproblem};
pub use model::{
    ActivePlan, ChannelSet, PhasePlan, Scheme, SolveReport, SystemConfig,
};
pub use orchestrator::{run_benchmarks, solve, solve_fixed_t};
