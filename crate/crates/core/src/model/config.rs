use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Converts a power level in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// Converts a dB figure to a linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Path-loss exponents of the three link types.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossExponents {
    pub hap_irs: f64,
    pub irs_wd: f64,
    pub hap_wd: f64,
}

impl Default for PathLossExponents {
    fn default() -> Self {
        Self {
            hap_irs: 2.0,
            irs_wd: 2.2,
            hap_wd: 3.5,
        }
    }
}

/// How the energy-transfer fraction `t` is searched.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TimeSearch {
    /// Coarse grid followed by golden-section refinement around the best point.
    Golden,
    /// Uniform grid only, with the given step.
    Grid { step: f64 },
}

/// Initial reflection vectors for the alternating optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseInit {
    /// All phases zero (`v = 1`).
    Ones,
    /// Uniform random phases from the realization's seed stream.
    Random,
}

/// Solver internals that rarely need changing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    /// Initial ellipsoid radius in normalized dual units.
    pub ellipsoid_radius: f64,
    /// Ellipsoid stopping width `sqrt(g^T S g)`.
    pub dual_tol: f64,
    pub ellipsoid_max_iters: usize,
    /// Relative duality gap target for the SDP solver.
    pub sdp_tol: f64,
    pub sdp_max_iters: usize,
    /// Fraction-to-boundary factor of the interior-point step.
    pub sdp_step_fraction: f64,
    pub sdp_sigma_min: f64,
    pub sdp_sigma_max: f64,
    /// Inner sweeps stop at `bcd_tol_ratio * tol`, so one active step is
    /// resolved more finely than the outer alternation it feeds.
    pub bcd_tol_ratio: f64,
    /// Grid step of the coarse pre-scan over `t`.
    pub t_prescan_step: f64,
    /// Final bracket width of the golden-section refinement.
    pub t_golden_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            ellipsoid_radius: 1e3,
            dual_tol: 1e-6,
            ellipsoid_max_iters: 20_000,
            sdp_tol: 1e-7,
            sdp_max_iters: 100,
            sdp_step_fraction: 0.98,
            sdp_sigma_min: 0.05,
            sdp_sigma_max: 0.5,
            bcd_tol_ratio: 0.1,
            t_prescan_step: 0.05,
            t_golden_tol: 1e-3,
        }
    }
}

/// All scalar parameters of one simulated network. Powers and energies are
/// stored in linear units (W, J); dB quantities are converted on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// HAP transmit power budget `P0` (W).
    pub p0_max: f64,
    /// Energy-harvesting efficiency.
    pub eta: f64,
    /// Receiver noise power (W).
    pub n0: f64,
    pub num_users: usize,
    pub num_hap_antennas: usize,
    pub num_irs_elements: usize,
    /// Rate weights, one per user.
    pub weights: Vec<f64>,
    /// Battery energy at the start of the block (J).
    pub e_initial: f64,
    /// Battery capacity (J).
    pub e_battery: f64,
    /// Fixed circuit energy per user and block (J).
    pub e_circuit: Vec<f64>,
    pub block_time: f64,
    /// Linear path-loss gain at the reference distance.
    pub c0: f64,
    /// Reference distance (m).
    pub d0: f64,
    pub alphas: PathLossExponents,
    pub hap_pos: [f64; 2],
    pub irs_pos: [f64; 2],
    /// Distance of the user disk center from the HAP along the x axis (m).
    pub wd_center_distance: f64,
    pub wd_radius: f64,
    pub tol: f64,
    pub max_outer_iters: usize,
    pub max_bcd_iters: usize,
    /// Gaussian-randomization candidates per reflection vector.
    pub gr_candidates: usize,
    pub t_search: TimeSearch,
    pub phase_init: PhaseInit,
    pub solver: SolverSettings,
}

impl Default for SystemConfig {
    fn default() -> Self {
        let k = 4;
        Self {
            p0_max: dbm_to_watts(30.0),
            eta: 0.8,
            n0: dbm_to_watts(-90.0),
            num_users: k,
            num_hap_antennas: 6,
            num_irs_elements: 30,
            weights: vec![1.0; k],
            e_initial: 0.0,
            e_battery: 1.0,
            e_circuit: vec![1e-6; k],
            block_time: 1.0,
            c0: db_to_linear(-20.0),
            d0: 1.0,
            alphas: PathLossExponents::default(),
            hap_pos: [0.0, 0.0],
            irs_pos: [4.0, 3.0],
            wd_center_distance: 8.0,
            wd_radius: 2.0,
            tol: 1e-4,
            max_outer_iters: 50,
            max_bcd_iters: 200,
            gr_candidates: 100,
            t_search: TimeSearch::Golden,
            phase_init: PhaseInit::Ones,
            solver: SolverSettings::default(),
        }
    }
}

impl SystemConfig {
    /// Checks every invariant; returns a message naming the first violation.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.p0_max > 0.0) || !self.p0_max.is_finite() {
            return bad(format!("p0_max must be positive, got {}", self.p0_max));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad(format!("eta must lie in (0, 1), got {}", self.eta));
        }
        if !(self.n0 > 0.0) || !self.n0.is_finite() {
            return bad(format!("n0 must be positive, got {}", self.n0));
        }
        if self.num_users == 0 || self.num_hap_antennas == 0 || self.num_irs_elements == 0 {
            return bad("num_users, num_hap_antennas and num_irs_elements must be at least 1".into());
        }
        if self.weights.len() != self.num_users {
            return bad(format!(
                "weights has {} entries for {} users",
                self.weights.len(),
                self.num_users
            ));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return bad("weights must be nonnegative".into());
        }
        if self.e_circuit.len() != self.num_users {
            return bad(format!(
                "e_circuit has {} entries for {} users",
                self.e_circuit.len(),
                self.num_users
            ));
        }
        if self.e_circuit.iter().any(|e| !(*e >= 0.0)) {
            return bad("e_circuit must be nonnegative".into());
        }
        if !(self.e_initial >= 0.0) || !(self.e_battery >= self.e_initial) {
            return bad(format!(
                "need e_battery >= e_initial >= 0, got e_initial={} e_battery={}",
                self.e_initial, self.e_battery
            ));
        }
        if self.block_time != 1.0 {
            return bad("block_time is normalized to 1".into());
        }
        if !(self.c0 > 0.0) || !(self.d0 > 0.0) {
            return bad("c0 and d0 must be positive".into());
        }
        let a = self.alphas;
        if [a.hap_irs, a.irs_wd, a.hap_wd].iter().any(|x| !x.is_finite() || *x < 0.0) {
            return bad("path-loss exponents must be finite and nonnegative".into());
        }
        if !(self.wd_center_distance > 0.0) || !(self.wd_radius >= 0.0) {
            return bad("wd_center_distance must be positive and wd_radius nonnegative".into());
        }
        if distance(self.hap_pos, self.irs_pos) <= 0.0 {
            return bad("HAP and IRS positions must differ".into());
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_outer_iters == 0 || self.max_bcd_iters == 0 || self.gr_candidates == 0 {
            return bad("iteration caps and gr_candidates must be at least 1".into());
        }
        if let TimeSearch::Grid { step } = self.t_search {
            if !(step > 0.0 && step < 0.5) {
                return bad(format!("t grid step must lie in (0, 0.5), got {step}"));
            }
        }
        let s = &self.solver;
        if !(s.ellipsoid_radius > 0.0) || !(s.dual_tol > 0.0) || !(s.sdp_tol > 0.0) {
            return bad("solver radius and tolerances must be positive".into());
        }
        if !(s.sdp_step_fraction > 0.0 && s.sdp_step_fraction < 1.0) {
            return bad("sdp_step_fraction must lie in (0, 1)".into());
        }
        if !(s.sdp_sigma_min > 0.0 && s.sdp_sigma_min <= s.sdp_sigma_max && s.sdp_sigma_max < 1.0) {
            return bad("need 0 < sdp_sigma_min <= sdp_sigma_max < 1".into());
        }
        if !(s.t_prescan_step > 0.0 && s.t_prescan_step < 0.5) || !(s.t_golden_tol > 0.0) {
            return bad("t search steps must be positive and below 0.5".into());
        }
        Ok(())
    }

    /// Changes the user count. Per-user vectors must be uniform so they can be
    /// resized unambiguously.
    pub fn with_num_users(mut self, k: usize) -> Result<Self> {
        let uniform = |v: &[f64]| v.windows(2).all(|w| w[0] == w[1]);
        if !uniform(&self.weights) || !uniform(&self.e_circuit) {
            return Err(Error::InvalidConfig(
                "cannot change num_users with non-uniform weights or e_circuit".into(),
            ));
        }
        let w = self.weights.first().copied().unwrap_or(1.0);
        let e = self.e_circuit.first().copied().unwrap_or(0.0);
        self.num_users = k;
        self.weights = vec![w; k];
        self.e_circuit = vec![e; k];
        Ok(self)
    }

    /// Position of the user-disk center.
    pub fn wd_center(&self) -> [f64; 2] {
        [self.hap_pos[0] + self.wd_center_distance, self.hap_pos[1]]
    }
}

pub(crate) fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}
