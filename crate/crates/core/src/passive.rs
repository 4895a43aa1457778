//! Reflection-phase step at fixed active variables: semidefinite relaxation
//! of the lifted quadratic forms followed by Gaussian randomization.
//!
//! With `x = [v; 1]` every MSE and harvested-energy term is a Hermitian
//! quadratic form in `x`, so `V = x x^H` turns both subproblems into SDPs
//! over `diag(V) = 1`, `V >= 0` with the rank constraint dropped. The WIT
//! vector minimizes the weighted MSE; the WET vector only has to keep the
//! current powers feasible, so it maximizes the smallest energy margin.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::model::metrics::{self, mse_with, wmmse_objective_unchecked};
use crate::model::rng::{mix64, stream_rng, Stream};
use crate::model::{ActivePlan, ChannelSet, PhasePlan, SystemConfig};
use crate::numerics::hermitian_eig;
use crate::sdp::{self, SdpProblem, SdpSettings, SdpSolution, SdpStatus};
use crate::{CMat, CVec, Error, Result};

/// Lifted quadratic forms of one `(F, P, W)` point.
#[derive(Debug, Clone)]
pub struct LiftedData {
    /// `zeta^_i` as a row: `zeta^_i x = f_i^H b~_i sqrt(P_i) - 1`.
    pub zeta_hat: Vec<CVec>,
    /// `psi_i = zeta^_i^H zeta^_i`.
    pub psi: Vec<CMat>,
    /// `interference[i][j] = zeta-_j^H f_i f_i^H zeta-_j`, zero on the diagonal.
    pub interference: Vec<Vec<CMat>>,
    /// `zeta-_i^H W zeta-_i`.
    pub energy: Vec<CMat>,
    /// `N0 ||f_i||^2`.
    pub noise: Vec<f64>,
    pub powers: Vec<f64>,
}

impl LiftedData {
    pub fn num_users(&self) -> usize {
        self.psi.len()
    }

    /// Lifted length `N + 1`.
    pub fn dim(&self) -> usize {
        self.psi.first().map_or(1, |m| m.nrows())
    }

    /// Per-user MSE at the rank-one point `x x^H`.
    pub fn mse(&self, x: &CVec) -> Vec<f64> {
        let k = self.num_users();
        (0..k)
            .map(|i| {
                let own = quad(&self.psi[i], x);
                let inter: f64 = (0..k).filter(|&j| j != i).map(|j| self.powers[j] * quad(&self.interference[i][j], x)).sum();
                own + inter + self.noise[i]
            })
            .collect()
    }

    /// `x^H zeta-_i^H W zeta-_i x`, the received energy power of user `i`.
    pub fn energy_forms(&self, x: &CVec) -> Vec<f64> {
        self.energy.iter().map(|e| quad(e, x)).collect()
    }
}

fn quad(a: &CMat, x: &CVec) -> f64 {
    x.dotc(&(a * x)).re
}

/// `[v; 1]`.
pub fn lift(v: &CVec) -> CVec {
    let n = v.len();
    let mut x = CVec::zeros(n + 1);
    x.rows_mut(0, n).copy_from(v);
    x[n] = Complex64::new(1.0, 0.0);
    x
}

pub fn build_lifted(channels: &ChannelSet, receivers: &[CVec], powers: &[f64], w: &CMat, n0: f64) -> Result<LiftedData> {
    let k = channels.num_users();
    let m = channels.num_antennas();
    if receivers.len() != k || powers.len() != k {
        return Err(Error::contract("one receiver and one power per user required"));
    }
    if receivers.iter().any(|f| f.len() != m) || w.shape() != (m, m) {
        return Err(Error::contract("receiver or energy beam dimension mismatch"));
    }
    let n1 = channels.num_elements() + 1;
    let zbar: Vec<&CMat> = (0..k).map(|i| channels.cascade_lifted(i)).collect();
    let zeta_hat: Vec<CVec> = (0..k)
        .map(|i| {
            // row f_i^H zeta-_i sqrt(P_i), minus one on the direct-path entry
            let mut row = (zbar[i].adjoint() * &receivers[i]).map(|z| z.conj()) * Complex64::new(powers[i].sqrt(), 0.0);
            row[n1 - 1] -= Complex64::new(1.0, 0.0);
            row
        })
        .collect();
    let psi = zeta_hat.iter().map(|z| z.conjugate() * z.transpose()).collect();
    let interference = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    if i == j {
                        CMat::zeros(n1, n1)
                    } else {
                        let c = zbar[j].adjoint() * &receivers[i];
                        &c * c.adjoint()
                    }
                })
                .collect()
        })
        .collect();
    let energy = zbar.iter().map(|z| hermitize(&(z.adjoint() * w * *z))).collect();
    let noise = receivers.iter().map(|f| n0 * f.norm_squared()).collect();
    Ok(LiftedData { zeta_hat, psi, interference, energy, noise, powers: powers.to_vec() })
}

fn hermitize(a: &CMat) -> CMat {
    (a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

/// WIT relaxation: `min tr(C V)` over `diag(V) = 1`, `V >= 0`. The
/// weighted noise constant is kept out of `C`.
#[derive(Debug, Clone)]
pub struct V2Program {
    pub problem: SdpProblem,
    /// `sum_i w_i q_i N0 ||f_i||^2`.
    pub constant: f64,
}

pub fn assemble_v2_sdp(lifted: &LiftedData, q: &[f64], weights: &[f64]) -> Result<V2Program> {
    let k = lifted.num_users();
    if q.len() != k || weights.len() != k {
        return Err(Error::contract("one MSE weight and one rate weight per user required"));
    }
    if q.iter().any(|x| !(*x > 0.0)) {
        return Err(Error::contract("MSE weights must be positive"));
    }
    let n1 = lifted.dim();
    let mut c = CMat::zeros(n1, n1);
    let mut constant = 0.0;
    for i in 0..k {
        let wq = weights[i] * q[i];
        if wq == 0.0 {
            continue;
        }
        c += &lifted.psi[i] * Complex64::new(wq, 0.0);
        for j in (0..k).filter(|&j| j != i) {
            c += &lifted.interference[i][j] * Complex64::new(wq * lifted.powers[j], 0.0);
        }
        constant += wq * lifted.noise[i];
    }
    let mut problem = SdpProblem::new(n1).with_objective(hermitize(&c));
    problem.add_unit_diagonal(0..n1);
    Ok(V2Program { problem, constant })
}

/// WET program: maximize the smallest energy margin `s` subject to
/// `eta t tr(V E_i) >= req_i + s` for every user, silent ones included so
/// that a starved user can be brought back within reach.
///
/// The variable is `X = [[V, .], [., s + shift]]` of size `N + 2`; `shift`
/// makes the margin entry nonnegative for every feasible `V`, so the program
/// is always strictly feasible and a negative optimal margin reports that no
/// relaxed `V` covers all requirements.
#[derive(Debug, Clone)]
pub struct V1Program {
    pub problem: SdpProblem,
    pub shift: f64,
    /// `req_i = (1 - t) P_i + E_i^(2) - E0` per user.
    pub requirements: Vec<f64>,
}

impl V1Program {
    /// Margin `s` encoded in a solution matrix.
    pub fn margin(&self, x: &CMat) -> f64 {
        let n = self.problem.dim;
        x[(n - 1, n - 1)].re - self.shift
    }
}

pub fn assemble_v1_sdp(lifted: &LiftedData, t: f64, config: &SystemConfig) -> Result<V1Program> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::domain(format!("t must lie in (0, 1), got {t}")));
    }
    let k = lifted.num_users();
    if config.e_circuit.len() != k {
        return Err(Error::contract("configuration does not match the lifted data"));
    }
    let n1 = lifted.dim();
    let dim = n1 + 1;
    let requirements: Vec<f64> = (0..k)
        .map(|i| (1.0 - t) * lifted.powers[i] + config.e_circuit[i] - config.e_initial)
        .collect();
    if let Some(pos) = requirements.iter().position(|r| *r > config.e_battery - config.e_initial) {
        return Err(Error::Infeasible(format!(
            "user {} needs more energy than the battery holds",
            pos
        )));
    }
    let et = config.eta * t;
    // any V gives a nonnegative harvest, so s = -max(req) is always feasible;
    // the extra mean-harvest term keeps the margin entry strictly positive
    let typical: f64 =
        lifted.energy.iter().map(|e| et * e.trace().re / n1 as f64).sum::<f64>() / k.max(1) as f64;
    let shift = requirements.iter().copied().fold(0.0f64, f64::max) + typical.max(f64::MIN_POSITIVE);
    let mut objective = CMat::zeros(dim, dim);
    objective[(dim - 1, dim - 1)] = Complex64::new(-1.0, 0.0);
    let mut problem = SdpProblem::new(dim).with_objective(objective);
    problem.add_unit_diagonal(0..n1);
    for (i, req) in requirements.iter().enumerate() {
        let mut g = CMat::zeros(dim, dim);
        g.view_mut((0, 0), (n1, n1)).copy_from(&(&lifted.energy[i] * Complex64::new(et, 0.0)));
        g[(dim - 1, dim - 1)] = Complex64::new(-1.0, 0.0);
        problem.add_inequality(g, req - shift);
    }
    Ok(V1Program { problem, shift, requirements })
}

/// Which candidate the randomization kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateSource {
    Randomized,
    DominantEigvec,
    Previous,
}

#[derive(Debug, Clone)]
pub struct RandomizationResult {
    pub v: CVec,
    pub objective: f64,
    /// Candidates evaluated, including the eigenvector and the incumbent.
    pub candidate_count: usize,
    pub source: CandidateSource,
}

/// `exp(j arg(x_{1:N} / x_{N+1}))`; the reference is dropped when
/// `x_{N+1} = 0`.
pub fn phases_from_lifted(x: &CVec) -> CVec {
    let n = x.len().saturating_sub(1);
    let reference = x[n];
    let rot = if reference.norm() > 0.0 { reference.conj() / reference.norm() } else { Complex64::new(1.0, 0.0) };
    CVec::from_iterator(
        n,
        x.rows(0, n).iter().map(|z| {
            let r = z * rot;
            if r.norm() > 0.0 {
                Complex64::from_polar(1.0, r.arg())
            } else {
                Complex64::new(1.0, 0.0)
            }
        }),
    )
}

/// Gaussian randomization around a relaxed solution `V` (size `N + 1`).
///
/// The evaluator maps a unit-modulus `v` to `(objective, feasible)`; lower
/// objectives are better. Candidates are `U S^(1/2) r` for circular Gaussian
/// `r`, the dominant eigenvector and the incumbent `previous`. The incumbent
/// wins ties and is returned when nothing feasible beats it.
pub fn randomize<F>(
    v: &CMat,
    mut evaluator: F,
    n_candidates: usize,
    previous: Option<&CVec>,
    rng: &mut ChaCha8Rng,
) -> Result<RandomizationResult>
where
    F: FnMut(&CVec) -> Result<(f64, bool)>,
{
    let n1 = v.nrows();
    if n1 == 0 || v.ncols() != n1 {
        return Err(Error::contract("relaxed matrix must be square and nonempty"));
    }
    if n_candidates == 0 {
        return Err(Error::contract("at least one randomization candidate required"));
    }
    if previous.is_some_and(|p| p.len() + 1 != n1) {
        return Err(Error::contract("previous phase vector has the wrong length"));
    }
    let eig = hermitian_eig(v)?;
    let mut factor = eig.vectors.clone();
    for (k, lambda) in eig.values.iter().enumerate() {
        factor.column_mut(k).scale_mut(lambda.max(0.0).sqrt());
    }

    let mut best: Option<(f64, CVec, CandidateSource)> = None;
    let mut count = 0usize;
    let mut consider = |cand: CVec, source: CandidateSource, best: &mut Option<(f64, CVec, CandidateSource)>| -> Result<()> {
        let (obj, feasible) = evaluator(&cand)?;
        count += 1;
        if feasible && obj.is_finite() && best.as_ref().is_none_or(|(b, ..)| obj < *b) {
            *best = Some((obj, cand, source));
        }
        Ok(())
    };
    if let Some(p) = previous {
        consider(p.clone(), CandidateSource::Previous, &mut best)?;
    }
    consider(phases_from_lifted(&eig.vector(0)), CandidateSource::DominantEigvec, &mut best)?;
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    for _ in 0..n_candidates {
        let r = CVec::from_fn(n1, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(scale * re, scale * im)
        });
        consider(phases_from_lifted(&(&factor * r)), CandidateSource::Randomized, &mut best)?;
    }
    match best {
        Some((objective, v, source)) => Ok(RandomizationResult { v, objective, candidate_count: count, source }),
        None => Err(Error::Infeasible("no feasible randomization candidate".into())),
    }
}

/// Summary of one relaxed solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationInfo {
    pub status: SdpStatus,
    pub value: f64,
    pub iterations: usize,
}

impl RelaxationInfo {
    fn from(sol: &SdpSolution) -> Self {
        Self { status: sol.status, value: sol.primal_value, iterations: sol.iterations }
    }
}

#[derive(Debug, Clone)]
pub struct PassiveOutcome {
    pub phases: PhasePlan,
    /// Weighted-MMSE objective (nats) at fixed `(q, F, P)` before and after.
    pub objective_before: f64,
    pub objective_after: f64,
    /// Smallest energy margin (J) over all users under the new WET vector.
    pub energy_margin: f64,
    pub wit_source: CandidateSource,
    pub wet_source: CandidateSource,
    pub wit_relaxation: Option<RelaxationInfo>,
    pub wet_relaxation: Option<RelaxationInfo>,
    /// Problems met on the way; the incumbent phases were kept for them.
    pub diagnostics: Vec<String>,
}

fn sdp_settings(config: &SystemConfig) -> SdpSettings {
    let s = &config.solver;
    SdpSettings {
        tol: s.sdp_tol,
        max_iters: s.sdp_max_iters,
        step_fraction: s.sdp_step_fraction,
        sigma_min: s.sdp_sigma_min,
        sigma_max: s.sdp_sigma_max,
    }
}

/// Energy margins `min(E0 + E^(1), Emax) - (1 - t) P_i - E_i^(2)` per user.
fn energy_margins(channels: &ChannelSet, v1: &CVec, plan: &ActivePlan, t: f64, config: &SystemConfig) -> Result<Vec<f64>> {
    let wet = channels.effective_channels(v1)?;
    let harvest = metrics::harvested_energy_with(&plan.energy_beam, &wet, t, config.eta);
    Ok((0..plan.powers.len())
        .map(|i| {
            (config.e_initial + harvest[i]).min(config.e_battery) - (1.0 - t) * plan.powers[i] - config.e_circuit[i]
        })
        .collect())
}

/// One reflection update at fixed `(W, F, P, q)`.
///
/// Never increases the weighted MSE and never breaks the energy constraints
/// of the plan: both randomizations keep the incumbent vector as a
/// candidate. `rng_key` selects the randomization stream.
pub fn solve_passive(
    channels: &ChannelSet,
    plan: &ActivePlan,
    phases: &PhasePlan,
    t: f64,
    config: &SystemConfig,
    seed: u64,
    rng_key: u64,
) -> Result<PassiveOutcome> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::domain(format!("t must lie in (0, 1), got {t}")));
    }
    phases.validate()?;
    if phases.num_elements() != channels.num_elements() {
        return Err(Error::contract("phase plan does not match the IRS size"));
    }
    let weights = &config.weights;
    let n0 = config.n0;
    let wmmse_at = |v2: &CVec| -> Result<f64> {
        let wit = channels.effective_channels(v2)?;
        let e = mse_with(&plan.receivers, &wit, &plan.powers, n0);
        Ok(wmmse_objective_unchecked(&plan.mse_weights, &e, t, weights))
    };
    let objective_before = wmmse_at(&phases.wit)?;
    let margins_before = energy_margins(channels, &phases.wet, plan, t, config)?;
    let margin_of = |m: &[f64]| m.iter().copied().fold(f64::INFINITY, f64::min);
    let mut out = PassiveOutcome {
        phases: phases.clone(),
        objective_before,
        objective_after: objective_before,
        energy_margin: margin_of(&margins_before),
        wit_source: CandidateSource::Previous,
        wet_source: CandidateSource::Previous,
        wit_relaxation: None,
        wet_relaxation: None,
        diagnostics: Vec::new(),
    };
    if channels.num_elements() == 0 {
        return Ok(out);
    }

    let lifted = build_lifted(channels, &plan.receivers, &plan.powers, &plan.energy_beam, n0)?;
    let settings = sdp_settings(config);
    let mut rng = stream_rng(seed, Stream::Randomization(mix64(rng_key)));

    // WIT vector: weighted-MSE relaxation
    let v2 = assemble_v2_sdp(&lifted, &plan.mse_weights, weights)?;
    match sdp::solve_with(&v2.problem, &settings) {
        Ok(sol) if sol.status != SdpStatus::Infeasible => {
            out.wit_relaxation = Some(RelaxationInfo::from(&sol));
            let res = randomize(
                &sol.x,
                |v| Ok((wmmse_at(v)?, true)),
                config.gr_candidates,
                Some(&phases.wit),
                &mut rng,
            )?;
            out.phases.wit = res.v;
            out.objective_after = res.objective;
            out.wit_source = res.source;
        }
        Ok(_) => out.diagnostics.push("WIT relaxation reported infeasible".into()),
        Err(e) => out.diagnostics.push(format!("WIT relaxation failed: {e}")),
    }

    // WET vector: largest worst-case energy margin
    match assemble_v1_sdp(&lifted, t, config) {
        Ok(v1) => match sdp::solve_with(&v1.problem, &settings) {
            Ok(sol) if sol.status != SdpStatus::Infeasible => {
                out.wet_relaxation = Some(RelaxationInfo::from(&sol));
                let n1 = lifted.dim();
                let block = sol.x.view((0, 0), (n1, n1)).into_owned();
                let res = randomize(
                    &block,
                    |v| {
                        // silent users may fall short, transmitting ones may not
                        let margins = energy_margins(channels, v, plan, t, config)?;
                        let covered = margins.iter().zip(&plan.powers).all(|(m, p)| *p <= 0.0 || *m >= 0.0);
                        Ok((-margin_of(&margins), covered))
                    },
                    config.gr_candidates,
                    Some(&phases.wet),
                    &mut rng,
                );
                match res {
                    Ok(res) => {
                        out.phases.wet = res.v;
                        out.energy_margin = -res.objective;
                        out.wet_source = res.source;
                    }
                    Err(e) => out.diagnostics.push(format!("WET randomization: {e}")),
                }
            }
            Ok(_) => out.diagnostics.push("WET relaxation reported infeasible".into()),
            Err(e) => out.diagnostics.push(format!("WET relaxation failed: {e}")),
        },
        Err(e) => out.diagnostics.push(format!("WET program not built: {e}")),
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::active::{solve_p3, ActiveSubproblem};
    use crate::model::{realize, unit_phases};
    use rand::SeedableRng;

    fn small_config(k: usize, m: usize, n: usize) -> SystemConfig {
        let mut c = SystemConfig::default().with_num_users(k).unwrap();
        c.num_hap_antennas = m;
        c.num_irs_elements = n;
        c
    }

    fn random_v(rng: &mut ChaCha8Rng, n: usize) -> CVec {
        unit_phases(&(0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect::<Vec<_>>())
    }

    /// Channels, a converged active plan and its phases.
    fn instance(k: usize, m: usize, n: usize, seed: u64, t: f64) -> (SystemConfig, ChannelSet, PhasePlan, ActivePlan) {
        let cfg = small_config(k, m, n);
        let ch = realize(&cfg, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ph = PhasePlan::new(random_v(&mut rng, n), random_v(&mut rng, n)).unwrap();
        let sub = ActiveSubproblem::new(&ch, &ph, t, &cfg).unwrap();
        let plan = solve_p3(&sub, None).unwrap().plan;
        (cfg, ch, ph, plan)
    }

    fn rank_one(v: &CVec) -> CMat {
        let x = lift(v);
        &x * x.adjoint()
    }

    #[test]
    fn zero_power_lift() {
        let cfg = small_config(2, 2, 3);
        let ch = realize(&cfg, 1).unwrap();
        let f = vec![CVec::from_element(2, Complex64::new(1.0, 0.5)); 2];
        let l = build_lifted(&ch, &f, &[0.0, 0.0], &CMat::identity(2, 2), cfg.n0).unwrap();
        for i in 0..2 {
            let mut expect = CVec::zeros(4);
            expect[3] = Complex64::new(-1.0, 0.0);
            assert_eq!(l.zeta_hat[i], expect);
            let mut psi = CMat::zeros(4, 4);
            psi[(3, 3)] = Complex64::new(1.0, 0.0);
            assert_eq!(l.psi[i], psi);
        }
    }

    #[test]
    fn lifted_forms_match_the_model() {
        let (cfg, ch, _, plan) = instance(3, 3, 5, 4, 0.4);
        let l = build_lifted(&ch, &plan.receivers, &plan.powers, &plan.energy_beam, cfg.n0).unwrap();
        for psi in &l.psi {
            let eig = hermitian_eig(psi).unwrap();
            assert!(eig.values[1].abs() <= 1e-12 * eig.values[0].abs().max(1e-300));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let v = random_v(&mut rng, 5);
            let x = lift(&v);
            let direct = metrics::mse(&plan.receivers, &v, &ch, &plan.powers, cfg.n0).unwrap();
            for (a, b) in l.mse(&x).iter().zip(&direct) {
                assert!((a - b).abs() <= 1e-10 * b.max(1.0));
            }
            let harvest = metrics::harvested_energy(&plan.energy_beam, &v, &ch, 0.4, cfg.eta).unwrap();
            for (a, b) in l.energy_forms(&x).iter().zip(&harvest) {
                assert!((cfg.eta * 0.4 * a - b).abs() <= 1e-10 * b.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn single_user_zero_power_relaxation_value() {
        let cfg = small_config(1, 2, 3);
        let ch = realize(&cfg, 2).unwrap();
        let f = vec![CVec::zeros(2)];
        let l = build_lifted(&ch, &f, &[0.0], &CMat::identity(2, 2), cfg.n0).unwrap();
        let (w, q) = (1.5, 2.0);
        let prog = assemble_v2_sdp(&l, &[q], &[w]).unwrap();
        let sol = sdp::solve(&prog.problem, 1e-9, 100).unwrap();
        assert!(sol.is_optimal());
        assert!((sol.primal_value + prog.constant - w * q).abs() <= 1e-6);
    }

    #[test]
    fn wit_objective_is_nonnegative_and_exact_at_rank_one() {
        let (cfg, ch, _, plan) = instance(3, 2, 4, 9, 0.5);
        let l = build_lifted(&ch, &plan.receivers, &plan.powers, &plan.energy_beam, cfg.n0).unwrap();
        let prog = assemble_v2_sdp(&l, &plan.mse_weights, &cfg.weights).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut mix = CMat::zeros(5, 5);
        for _ in 0..10 {
            let v = random_v(&mut rng, 4);
            let v_mat = rank_one(&v);
            let value = prog.problem.objective_value(&v_mat) + prog.constant;
            let e = metrics::mse(&plan.receivers, &v, &ch, &plan.powers, cfg.n0).unwrap();
            let direct: f64 = (0..3).map(|i| cfg.weights[i] * plan.mse_weights[i] * e[i]).sum();
            assert!((value - direct).abs() <= 1e-10 * direct);
            mix += v_mat * Complex64::new(0.1, 0.0);
        }
        assert!(prog.problem.objective_value(&mix) + prog.constant >= 0.0);
    }

    #[test]
    fn wet_program_with_no_requirement_has_positive_margin() {
        let mut cfg = small_config(2, 2, 3);
        cfg.e_initial = 2e-6;
        let ch = realize(&cfg, 3).unwrap();
        let f = vec![CVec::zeros(2); 2];
        let l = build_lifted(&ch, &f, &[0.0, 0.0], &CMat::identity(2, 2), cfg.n0).unwrap();
        let prog = assemble_v1_sdp(&l, 0.5, &cfg).unwrap();
        let sol = sdp::solve(&prog.problem, 1e-9, 100).unwrap();
        assert!(sol.is_optimal());
        assert!(prog.margin(&sol.x) > 0.0);
    }

    #[test]
    fn wet_program_flags_impossible_requirements() {
        let cfg = small_config(2, 2, 3);
        let ch = realize(&cfg, 3).unwrap();
        let f = vec![CVec::from_element(2, Complex64::new(1.0, 0.0)); 2];
        // more than any beam can deliver
        let l = build_lifted(&ch, &f, &[1e-3, 1e-3], &(CMat::identity(2, 2) * Complex64::new(0.5, 0.0)), cfg.n0).unwrap();
        let prog = assemble_v1_sdp(&l, 0.5, &cfg).unwrap();
        let sol = sdp::solve(&prog.problem, 1e-9, 200).unwrap();
        assert!(prog.margin(&sol.x) < 0.0);
        // more than the battery holds
        let l = build_lifted(&ch, &f, &[10.0, 0.0], &CMat::identity(2, 2), cfg.n0).unwrap();
        assert!(matches!(assemble_v1_sdp(&l, 0.5, &cfg), Err(Error::Infeasible(_))));
    }

    #[test]
    fn wet_relaxation_beats_the_incumbent() {
        let (cfg, ch, ph, plan) = instance(1, 2, 4, 6, 0.5);
        let l = build_lifted(&ch, &plan.receivers, &plan.powers, &plan.energy_beam, cfg.n0).unwrap();
        let prog = assemble_v1_sdp(&l, 0.5, &cfg).unwrap();
        let sol = sdp::solve(&prog.problem, 1e-9, 100).unwrap();
        assert!(sol.is_optimal());
        let incumbent = energy_margins(&ch, &ph.wet, &plan, 0.5, &cfg).unwrap()[0];
        assert!(prog.margin(&sol.x) >= incumbent - 1e-9 * incumbent.abs().max(1e-12));
    }

    #[test]
    fn rank_one_input_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let v = random_v(&mut rng, 6);
        let target = v.clone();
        let res = randomize(
            &(rank_one(&v) * Complex64::from_polar(1.0, 0.0)),
            |c| Ok(((c - &target).norm(), true)),
            20,
            None,
            &mut rng,
        )
        .unwrap();
        assert!((res.v - &v).norm() <= 1e-9);
        assert_eq!(res.candidate_count, 21);
    }

    #[test]
    fn incumbent_is_never_beaten_by_worse_candidates() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let prev = random_v(&mut rng, 4);
        let p2 = prev.clone();
        let noisy = rank_one(&random_v(&mut rng, 4)) + CMat::identity(5, 5);
        let res = randomize(&noisy, |c| Ok(((c - &p2).norm(), true)), 50, Some(&prev), &mut rng).unwrap();
        assert_eq!(res.source, CandidateSource::Previous);
        assert_eq!(res.objective, 0.0);
        // infeasible everywhere
        let none = randomize(&noisy, |_| Ok((0.0, false)), 5, None, &mut rng);
        assert!(none.is_err());
        assert!(randomize(&noisy, |_| Ok((0.0, true)), 0, None, &mut rng).is_err());
    }

    #[test]
    fn missing_reference_entry_uses_raw_phases() {
        let x = CVec::from_vec(vec![Complex64::from_polar(2.0, 0.3), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)]);
        let v = phases_from_lifted(&x);
        assert!((v[0].arg() - 0.3).abs() < 1e-15);
        assert_eq!(v[1], Complex64::new(1.0, 0.0));
    }

    fn grid_phases(n: usize, levels: usize) -> Vec<CVec> {
        let total = levels.pow(n as u32);
        (0..total)
            .map(|mut code| {
                let theta: Vec<f64> = (0..n)
                    .map(|_| {
                        let l = code % levels;
                        code /= levels;
                        std::f64::consts::TAU * l as f64 / levels as f64
                    })
                    .collect();
                unit_phases(&theta)
            })
            .collect()
    }

    #[test]
    fn randomization_is_close_to_the_phase_grid() {
        let grid = grid_phases(3, 16);
        for seed in 0..25 {
            let (cfg, ch, _, plan) = instance(2, 2, 3, 100 + seed, 0.5);
            let l = build_lifted(&ch, &plan.receivers, &plan.powers, &plan.energy_beam, cfg.n0).unwrap();
            let prog = assemble_v2_sdp(&l, &plan.mse_weights, &cfg.weights).unwrap();
            let eval = |v: &CVec| prog.problem.objective_value(&rank_one(v)) + prog.constant;
            let grid_best = grid.iter().map(eval).fold(f64::INFINITY, f64::min);
            let sol = sdp::solve(&prog.problem, 1e-9, 100).unwrap();
            assert!(sol.primal_value + prog.constant <= grid_best + 1e-7 * grid_best.abs());
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let res = randomize(&sol.x, |v| Ok((eval(v), true)), 1000, None, &mut rng).unwrap();
            assert!(res.objective <= grid_best * 1.02, "seed {seed}: {} vs {grid_best}", res.objective);
        }
    }

    #[test]
    fn empty_surface_is_a_no_op() {
        let (cfg, ch, ph, plan) = instance(2, 2, 0, 1, 0.5);
        let out = solve_passive(&ch, &plan, &ph, 0.5, &cfg, 1, 0).unwrap();
        assert_eq!(out.phases, ph);
        assert_eq!(out.objective_after, out.objective_before);
    }

    #[test]
    fn single_element_aligns_the_reflected_path() {
        let cfg = small_config(1, 2, 1);
        let g = CMat::from_row_slice(2, 1, &[Complex64::new(0.3, -0.2), Complex64::new(-0.1, 0.4)]);
        let ch = ChannelSet::new(
            g,
            vec![CVec::from_element(1, Complex64::from_polar(0.5, 1.1))],
            vec![CVec::zeros(2)],
        )
        .unwrap();
        let f = CVec::from_vec(vec![Complex64::new(0.7, 0.1), Complex64::new(-0.2, 0.5)]);
        let plan = ActivePlan {
            energy_beam: CMat::identity(2, 2) * Complex64::new(cfg.p0_max / 2.0, 0.0),
            receivers: vec![f.clone()],
            powers: vec![1e-6],
            mse_weights: vec![1.0],
            duals: vec![0.0],
            power_dual: 0.0,
        };
        let ph = PhasePlan::ones(1);
        let out = solve_passive(&ch, &plan, &ph, 0.5, &cfg, 3, 0).unwrap();
        // f^H G g v should be real positive
        let gain = f.dotc(&(ch.cascade(0) * &out.phases.wit));
        assert!(gain.arg().abs() <= 1e-6, "residual phase {}", gain.arg());
    }

    #[test]
    fn passive_step_is_monotone_and_keeps_energy_feasible() {
        for seed in 0..6 {
            let t = 0.3 + 0.08 * seed as f64;
            let (cfg, ch, ph, plan) = instance(3, 2, 6, 40 + seed, t);
            let out = solve_passive(&ch, &plan, &ph, t, &cfg, seed, 7).unwrap();
            assert!(out.objective_after <= out.objective_before);
            out.phases.validate().unwrap();
            let margins = energy_margins(&ch, &out.phases.wet, &plan, t, &cfg).unwrap();
            let covered = margins.iter().zip(&plan.powers).all(|(m, p)| *p <= 0.0 || *m >= 0.0);
            assert!(covered, "seed {seed}: {margins:?} with powers {:?}", plan.powers);
            assert!(out.diagnostics.is_empty(), "{:?}", out.diagnostics);
            // lift consistency of the returned vectors
            let l = build_lifted(&ch, &plan.receivers, &plan.powers, &plan.energy_beam, cfg.n0).unwrap();
            let e = metrics::mse(&plan.receivers, &out.phases.wit, &ch, &plan.powers, cfg.n0).unwrap();
            for (a, b) in l.mse(&lift(&out.phases.wit)).iter().zip(&e) {
                assert!((a - b).abs() <= 1e-9 * b.max(1.0));
            }
        }
    }

    #[test]
    fn passive_step_is_deterministic() {
        let (cfg, ch, ph, plan) = instance(2, 2, 4, 77, 0.5);
        let a = solve_passive(&ch, &plan, &ph, 0.5, &cfg, 5, 11).unwrap();
        let b = solve_passive(&ch, &plan, &ph, 0.5, &cfg, 5, 11).unwrap();
        assert_eq!(a.phases, b.phases);
    }
}
