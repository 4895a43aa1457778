use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::phases::PhasePlan;
use crate::{CMat, CVec, Error, Result};

/// Active-side decision variables: HAP energy beamformer, receive
/// beamformers, user powers and the WMMSE/dual auxiliaries.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivePlan {
    /// Energy covariance `W` (M x M, Hermitian PSD).
    pub energy_beam: CMat,
    /// Receive beamformers `f_i`.
    pub receivers: Vec<CVec>,
    /// Uplink transmit powers `P_i` (W).
    pub powers: Vec<f64>,
    /// WMMSE weights `q_i`.
    pub mse_weights: Vec<f64>,
    /// Energy-causality multipliers `mu_i`.
    pub duals: Vec<f64>,
    /// Power-budget multiplier `mu_0`.
    pub power_dual: f64,
}

impl ActivePlan {
    pub fn num_users(&self) -> usize {
        self.powers.len()
    }

    /// Checks the structural invariants against the HAP power budget.
    pub fn validate(&self, p0_max: f64) -> Result<()> {
        let w = &self.energy_beam;
        let scale = w.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
        let asym = (w - w.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if asym > 1e-10 * scale.max(1.0) {
            return Err(Error::contract(format!("W is not Hermitian (asymmetry {asym:.3e})")));
        }
        let trace = w.trace().re;
        if trace > p0_max * (1.0 + 1e-9) {
            return Err(Error::contract(format!("tr(W) = {trace} exceeds P0 = {p0_max}")));
        }
        let eig = crate::numerics::hermitian_eig(w)?;
        if let Some(&min) = eig.values.last() {
            if min < -1e-9 * trace.abs().max(1e-300) {
                return Err(Error::contract(format!("W has negative eigenvalue {min:.3e}")));
            }
        }
        if self.powers.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::contract("negative user power"));
        }
        if self.mse_weights.iter().any(|q| !(*q > 0.0)) {
            return Err(Error::contract("WMMSE weights must be positive"));
        }
        Ok(())
    }
}

/// Which blocks of variables a scheme optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Joint active and passive optimization.
    Proposed,
    /// Passive beamforming only: isotropic energy beam, MMSE receivers.
    Pbo,
    /// Active beamforming only: fixed random reflection phases.
    Abo,
    /// No reflecting surface.
    NoIrs,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Proposed, Scheme::Pbo, Scheme::Abo, Scheme::NoIrs];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Pbo => "pbo",
            Scheme::Abo => "abo",
            Scheme::NoIrs => "no_irs",
        }
    }

    pub(crate) fn index(self) -> u32 {
        match self {
            Scheme::Proposed => 0,
            Scheme::Pbo => 1,
            Scheme::Abo => 2,
            Scheme::NoIrs => 3,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "proposed" => Ok(Scheme::Proposed),
            "pbo" => Ok(Scheme::Pbo),
            "abo" => Ok(Scheme::Abo),
            "no_irs" | "noirs" | "no-irs" => Ok(Scheme::NoIrs),
            other => Err(Error::InvalidConfig(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Optimality diagnostics of a converged active step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KktResiduals {
    /// Multiplier of the power budget implied by `W`: `tr(B W) / tr(W)`.
    pub power_dual: f64,
    /// Largest eigenvalue of `B = sum_i mu_i eta t b_i b_i^H`.
    pub lambda_max: f64,
    /// `mu_i * s_i` with `s_i` the energy-causality subgradient.
    pub complementary: Vec<f64>,
    /// `sigma_2(W) / sigma_1(W)`.
    pub rank_ratio: f64,
    /// `|tr(W) - P0| / P0`.
    pub trace_gap: f64,
}

/// Outcome of optimizing one channel realization under one scheme.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub scheme: Scheme,
    /// Weighted sum rate (bits per channel use).
    pub wsr_bits: f64,
    /// Optimal energy-transfer fraction.
    pub t_star: f64,
    /// Unweighted rate of each user (bits).
    pub per_user_rates: Vec<f64>,
    /// Alternating iterations used at `t_star`.
    pub outer_iters: usize,
    /// WSR after each alternating iteration at `t_star` (bits).
    pub objective_trace: Vec<f64>,
    pub kkt_residuals: KktResiduals,
    pub active: ActivePlan,
    pub phases: PhasePlan,
    /// Users whose circuit energy cannot be covered.
    pub inactive_users: Vec<usize>,
    /// Whether the alternation met its tolerance before the iteration cap.
    pub converged: bool,
    /// Every evaluated `(t, wsr_bits)` pair, in evaluation order.
    pub t_evaluations: Vec<(f64, f64)>,
}
