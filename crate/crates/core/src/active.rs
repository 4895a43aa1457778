//! Active beamforming at fixed reflection phases and time split: energy
//! beamformer `W`, receive beamformers `F` and device powers `P`.
//!
//! Block-coordinate descent on the weighted-MMSE reformulation. Each sweep
//! updates the MSE weights `q`, the MMSE receivers `F`, and then the coupled
//! `(P, W)` block, which is convex for fixed `(q, F)` and is solved through
//! its Lagrange dual over the energy-causality multipliers with the
//! ellipsoid method.

use num_complex::Complex64;

use crate::model::metrics::{self, mmse_receivers, mse_with, wmmse_objective_unchecked};
use crate::model::{ActivePlan, ChannelSet, KktResiduals, PhasePlan, SystemConfig};
use crate::numerics::fix_phase;
use crate::numerics::{ellipsoid_maximize_until, hermitian_eig, top_eigenpair, EllipsoidSettings};
use crate::{CMat, CVec, Error, Result};

/// The fixed data of one active step.
#[derive(Debug, Clone)]
pub struct ActiveSubproblem<'a> {
    pub channels: &'a ChannelSet,
    pub phases: &'a PhasePlan,
    pub t: f64,
    pub config: &'a SystemConfig,
    /// Effective WET channels `b_i`.
    pub wet: Vec<CVec>,
    /// Effective WIT channels `b~_i`.
    pub wit: Vec<CVec>,
    /// Gram matrix `b_i^H b_j` of the WET channels.
    gram: CMat,
}

impl<'a> ActiveSubproblem<'a> {
    pub fn new(channels: &'a ChannelSet, phases: &'a PhasePlan, t: f64, config: &'a SystemConfig) -> Result<Self> {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::domain(format!("t must lie in (0, 1), got {t}")));
        }
        if config.num_users != channels.num_users() || config.num_hap_antennas != channels.num_antennas() {
            return Err(Error::contract("configuration does not match channel dimensions"));
        }
        phases.validate()?;
        let wet = channels.effective_channels(&phases.wet)?;
        let k = wet.len();
        let gram = CMat::from_fn(k, k, |i, j| wet[i].dotc(&wet[j]));
        Ok(Self { channels, phases, t, config, wit: channels.effective_channels(&phases.wit)?, wet, gram })
    }

    pub fn num_users(&self) -> usize {
        self.wet.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.channels.num_antennas()
    }

    /// `E_i^(1) = eta t b_i^H W b_i`.
    pub fn harvested(&self, w: &CMat) -> Vec<f64> {
        metrics::harvested_energy_with(w, &self.wet, self.t, self.config.eta)
    }

    /// Largest feasible power per user under `W`:
    /// `max(0, min(E0 + E^(1), Emax) - E^(2)) / (1 - t)`.
    pub fn power_caps(&self, w: &CMat) -> Vec<f64> {
        self.caps_from_harvest(&self.harvested(w))
    }

    fn caps_from_harvest(&self, harvest: &[f64]) -> Vec<f64> {
        let c = self.config;
        harvest
            .iter()
            .zip(&c.e_circuit)
            .map(|(e1, e2)| ((c.e_initial + e1).min(c.e_battery) - e2).max(0.0) / (1.0 - self.t))
            .collect()
    }

    /// Weighted-MMSE objective in nats.
    pub fn wmmse(&self, q: &[f64], f: &[CVec], p: &[f64]) -> f64 {
        let e = mse_with(f, &self.wit, p, self.config.n0);
        wmmse_objective_unchecked(q, &e, self.t, &self.config.weights)
    }

    /// Weighted sum rate in bits with the given receivers.
    pub fn wsr_bits(&self, f: &[CVec], p: &[f64]) -> f64 {
        let gamma = metrics::sinr_with(f, &self.wit, p, self.config.n0);
        metrics::weighted_sum(&metrics::rates_from_sinr(&gamma, self.t), &self.config.weights)
    }

    fn isotropic_beam(&self) -> CMat {
        let m = self.num_antennas();
        CMat::identity(m, m) * Complex64::new(self.config.p0_max / m as f64, 0.0)
    }
}

/// Energy beamformer for given multipliers.
#[derive(Debug, Clone)]
pub struct EnergyBeam {
    pub w: CMat,
    /// Largest eigenvalue of `B = sum_i mu_i eta t b_i b_i^H`.
    pub lambda1: f64,
    pub u1: CVec,
    /// Set when all multipliers vanish and the unweighted sum was used.
    pub fallback: bool,
}

fn weighted_outer_sum(vectors: &[CVec], weights: &[f64]) -> CMat {
    let m = vectors.first().map_or(0, |v| v.len());
    let mut acc = CMat::zeros(m, m);
    for (b, &w) in vectors.iter().zip(weights) {
        if w != 0.0 {
            acc.ger(Complex64::new(w, 0.0), b, &b.conjugate(), Complex64::new(1.0, 0.0));
        }
    }
    acc
}

/// Top eigenpair of `sum_i c_i b_i b_i^H` through the `K x K` matrix
/// `C^(1/2) G C^(1/2)`, which shares its nonzero spectrum.
fn top_eigenpair_low_rank(sub: &ActiveSubproblem, weights: &[f64]) -> Result<(f64, CVec)> {
    let roots: Vec<f64> = weights.iter().map(|c| c.sqrt()).collect();
    let k = roots.len();
    let h = CMat::from_fn(k, k, |i, j| sub.gram[(i, j)] * (roots[i] * roots[j]));
    let (lambda, y) = top_eigenpair(&h)?;
    let mut u = CVec::zeros(sub.num_antennas());
    if lambda > 0.0 {
        for (j, b) in sub.wet.iter().enumerate() {
            u.axpy(y[j] * roots[j], b, Complex64::new(1.0, 0.0));
        }
        fix_phase(&mut u);
    }
    Ok((lambda.max(0.0), u))
}

/// `W = P0 u1 u1^H` with `u1` the top eigenvector of `sum_i mu_i eta t b_i b_i^H`.
pub fn optimal_energy_beamformer(mu: &[f64], sub: &ActiveSubproblem) -> Result<EnergyBeam> {
    if mu.len() != sub.num_users() {
        return Err(Error::contract("one multiplier per user required"));
    }
    if mu.iter().any(|m| !(*m >= 0.0)) {
        return Err(Error::contract("multipliers must be nonnegative"));
    }
    let scale = sub.config.eta * sub.t;
    let weights: Vec<f64> = mu.iter().map(|m| m * scale).collect();
    let (lambda1, u1) = if sub.num_users() < sub.num_antennas() {
        top_eigenpair_low_rank(sub, &weights)?
    } else {
        top_eigenpair(&weighted_outer_sum(&sub.wet, &weights))?
    };
    let (lambda1, u1, fallback) = if lambda1 > 0.0 {
        (lambda1, u1, false)
    } else {
        let (_, u) = top_eigenpair(&weighted_outer_sum(&sub.wet, &vec![1.0; sub.num_users()]))?;
        (0.0, u, true)
    };
    let w = &u1 * u1.adjoint() * Complex64::new(sub.config.p0_max, 0.0);
    Ok(EnergyBeam { w, lambda1, u1, fallback })
}

/// `q_i = 1 / e_i`.
pub fn update_q(e: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = e.iter().find(|x| !(**x > 0.0)) {
        return Err(Error::contract(format!("MSE must be positive, got {bad}")));
    }
    Ok(e.iter().map(|x| 1.0 / x).collect())
}

/// Matrix MMSE receivers. The flag reports that the noise floor was applied.
pub fn update_receivers(p: &[f64], sub: &ActiveSubproblem) -> Result<(Vec<CVec>, bool)> {
    if p.len() != sub.num_users() || p.iter().any(|x| !(*x >= 0.0)) {
        return Err(Error::contract("powers must be nonnegative, one per user"));
    }
    Ok(mmse_receivers(&sub.wit, p, sub.config.n0))
}

/// Quadratic and linear coefficients of the `sqrt(P)` form of the weighted
/// MSE: `sum_i (1 - t) (a_i P_i - 2 l_i sqrt(P_i))` plus a constant.
#[derive(Debug, Clone)]
struct PowerCoefficients {
    a: Vec<f64>,
    l: Vec<f64>,
}

fn power_coefficients(q: &[f64], f: &[CVec], sub: &ActiveSubproblem) -> PowerCoefficients {
    let k = sub.num_users();
    let w = &sub.config.weights;
    let a = (0..k)
        .map(|i| (0..k).map(|j| w[j] * q[j] * f[j].dotc(&sub.wit[i]).norm_sqr()).sum())
        .collect();
    let l = (0..k).map(|i| (w[i] * q[i] * f[i].dotc(&sub.wit[i]).re).max(0.0)).collect();
    PowerCoefficients { a, l }
}

fn unconstrained_power(l: f64, a: f64) -> f64 {
    if l > 0.0 && a > 0.0 {
        (l / a).powi(2)
    } else {
        0.0
    }
}

/// `P_i = (omega_i q_i Re(f_i^H b~_i)^+ / (sum_j omega_j q_j |f_j^H b~_i|^2 + mu_i))^2`.
pub fn update_powers(q: &[f64], f: &[CVec], mu: &[f64], sub: &ActiveSubproblem) -> Result<Vec<f64>> {
    let k = sub.num_users();
    if q.len() != k || f.len() != k || mu.len() != k {
        return Err(Error::contract("update_powers: length mismatch"));
    }
    if q.iter().any(|x| !(*x > 0.0)) || mu.iter().any(|x| !(*x >= 0.0)) {
        return Err(Error::contract("update_powers needs q > 0 and mu >= 0"));
    }
    let c = power_coefficients(q, f, sub);
    Ok((0..k).map(|i| unconstrained_power(c.l[i], c.a[i] + mu[i])).collect())
}

/// `s_i = (1 - t) P_i + E_i^(2) - eta t b_i^H W b_i` (Joules).
pub fn dual_subgradient(w: &CMat, p: &[f64], sub: &ActiveSubproblem) -> Vec<f64> {
    sub.harvested(w)
        .iter()
        .zip(p)
        .zip(&sub.config.e_circuit)
        .map(|((e1, p), e2)| (1.0 - sub.t) * p + e2 - e1)
        .collect()
}

/// Result of one active step.
#[derive(Debug, Clone)]
pub struct ActiveOutcome {
    pub plan: ActivePlan,
    /// Final weighted-MMSE objective (nats).
    pub wmmse_objective: f64,
    pub wsr_bits: f64,
    /// Weighted-MMSE objective after each sweep, starting with the initial point.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Users whose circuit energy cannot be covered (forced to `P_i = 0`).
    pub inactive_users: Vec<usize>,
    pub kkt: KktResiduals,
    /// Dual-oracle calls spent in the ellipsoid searches.
    pub dual_evaluations: usize,
    pub receiver_floor_applied: bool,
}

/// Minimizer of the `(P, W)` block for fixed `(q, F)`, certified by a dual
/// point within `gap` of it.
struct BlockSolution {
    w: CMat,
    p: Vec<f64>,
    mu: Vec<f64>,
    mu_scaled: Vec<f64>,
    gap: f64,
    /// Magnitude of the block objective, for judging the gap.
    scale: f64,
    evaluations: usize,
}

/// Users that cannot cover their circuit energy even with the whole beam
/// pointed at them; they transmit nothing and carry no multiplier.
fn unreachable_users(sub: &ActiveSubproblem) -> Vec<bool> {
    let c = sub.config;
    let et = c.eta * sub.t;
    sub.wet
        .iter()
        .zip(&c.e_circuit)
        .map(|(b, e2)| (c.e_initial + et * c.p0_max * b.norm_squared()).min(c.e_battery) < *e2)
        .collect()
}

/// Minimizes `sum_i (1 - t)(a_i P_i - 2 l_i sqrt(P_i))` over `tr(W) <= P0`
/// and the energy constraints by maximizing the dual over `mu`.
///
/// The search runs over `mu~_i = mu_i S_i` with `S_i = eta t P0 |b_i|^2 +
/// E_i^(2)`, so a unit step in any coordinate moves the Lagrangian by a
/// comparable amount. Every oracle call at `mu` also builds the primal point
/// `W(mu)` with the largest feasible powers; the search stops once one point
/// is within `gap_tol` of its own dual value. The returned `(W, P, mu)` come
/// from the same point, so `W` is exactly the beam for `mu` and each
/// `|mu_i s_i|` is bounded by the gap.
fn solve_power_beam(
    sub: &ActiveSubproblem,
    co: &PowerCoefficients,
    warm: Option<&[f64]>,
    gap_tol: f64,
) -> Result<BlockSolution> {
    // users that will not transmit need no circuit energy
    let mut dropped: Vec<bool> = unreachable_users(sub)
        .into_iter()
        .zip(&co.l)
        .map(|(u, l)| u || *l <= 0.0)
        .collect();
    loop {
        let block = solve_power_beam_masked(sub, co, warm, gap_tol, &dropped)?;
        if block.gap.is_finite() && block.gap <= gap_tol.max(1e-3 * block.scale) {
            return Ok(block);
        }
        // No beam covers every circuit requirement at once, so the dual is
        // unbounded: retire the user furthest from its requirement.
        let harvest = sub.harvested(&block.w);
        let short = (0..sub.num_users())
            .filter(|&i| !dropped[i])
            .map(|i| (i, sub.config.e_circuit[i] - sub.config.e_initial - harvest[i]))
            .filter(|(_, d)| *d > 0.0)
            .max_by(|a, b| a.1.total_cmp(&b.1));
        match short {
            Some((i, _)) => dropped[i] = true,
            None => return Ok(block),
        }
    }
}

fn solve_power_beam_masked(
    sub: &ActiveSubproblem,
    co: &PowerCoefficients,
    warm: Option<&[f64]>,
    gap_tol: f64,
    unreachable: &[bool],
) -> Result<BlockSolution> {
    let k = sub.num_users();
    let cfg = sub.config;
    let t = sub.t;
    let et = cfg.eta * t;
    let live: Vec<usize> = (0..k).filter(|&i| !unreachable[i]).collect();
    let scales: Vec<f64> = sub
        .wet
        .iter()
        .zip(&cfg.e_circuit)
        .map(|(b, e2)| (et * cfg.p0_max * b.norm_squared() + e2).max(1e-300))
        .collect();
    let phi = |p: &[f64]| -> f64 {
        (0..k).map(|i| (1.0 - t) * (co.a[i] * p[i] - 2.0 * co.l[i] * p[i].sqrt())).sum()
    };
    let scaled_full = |x: &[f64]| -> Vec<f64> {
        let mut full = vec![0.0; k];
        for (&i, v) in live.iter().zip(x) {
            full[i] = v.max(0.0);
        }
        full
    };

    // (gap, W, P, mu, mu~)
    let mut best: Option<(f64, CMat, Vec<f64>, Vec<f64>, Vec<f64>)> = None;
    let mut evaluations = 0usize;
    let gap_closed = std::cell::Cell::new(false);
    let mut oracle = |x: &[f64]| -> Result<(f64, Vec<f64>, bool)> {
        evaluations += 1;
        let mu_scaled = scaled_full(x);
        let mu: Vec<f64> = mu_scaled.iter().zip(&scales).map(|(m, s)| m / s).collect();
        let beam = optimal_energy_beamformer(&mu, sub)?;
        let harvest: Vec<f64> = sub
            .wet
            .iter()
            .map(|b| et * cfg.p0_max * beam.u1.dotc(b).norm_sqr())
            .collect();
        let mut dual = -cfg.p0_max * beam.lambda1;
        let mut grad = Vec::with_capacity(live.len());
        for &i in &live {
            let denom = co.a[i] + mu[i];
            let p_mu = unconstrained_power(co.l[i], denom);
            if denom > 0.0 {
                dual -= (1.0 - t) * co.l[i] * co.l[i] / denom;
            }
            dual += mu[i] * cfg.e_circuit[i];
            let slack = (1.0 - t) * p_mu + cfg.e_circuit[i] - harvest[i];
            // subgradient of -d with respect to mu~
            grad.push(-slack / scales[i]);
        }
        let caps = sub.caps_from_harvest(&harvest);
        let p: Vec<f64> = (0..k)
            .map(|i| if unreachable[i] { 0.0 } else { unconstrained_power(co.l[i], co.a[i]).min(caps[i]) })
            .collect();
        // a live user short of its circuit energy makes the point infeasible
        let feasible = live
            .iter()
            .all(|&i| (cfg.e_initial + harvest[i]).min(cfg.e_battery) >= cfg.e_circuit[i]);
        let gap = if feasible { phi(&p) - dual } else { f64::INFINITY };
        if best.as_ref().is_none_or(|(g, ..)| gap < *g) {
            best = Some((gap, beam.w, p, mu, mu_scaled));
        }
        gap_closed.set(gap <= gap_tol);
        Ok((dual, grad, gap <= gap_tol))
    };

    let base = EllipsoidSettings {
        init_radius: cfg.solver.ellipsoid_radius,
        // the certified gap is the real stopping rule; the width test is a backstop
        tol: cfg.solver.dual_tol * 1e-6,
        max_iters: cfg.solver.ellipsoid_max_iters,
    };
    let cold_center = vec![1.0; live.len()];
    if live.is_empty() {
        oracle(&[])?;
    } else {
        let warm_live: Option<Vec<f64>> = warm.map(|c| live.iter().map(|&i| c[i]).collect());
        if let Some(center) = &warm_live {
            // a small ball around the previous multipliers; widen if it fails
            let radius = 4.0 * center.iter().fold(1.0f64, |a, v| a.max(v.abs()));
            let local = EllipsoidSettings { init_radius: radius.min(base.init_radius), ..base };
            ellipsoid_maximize_until(&mut oracle, center, &local)?;
        }
        if !gap_closed.get() {
            ellipsoid_maximize_until(&mut oracle, &cold_center, &base)?;
        }
    }
    let (gap, w, p, mu, mu_scaled) = best.expect("oracle evaluated at least once");
    let scale = phi(&p).abs().max(cfg.solver.dual_tol);
    Ok(BlockSolution { w, p, mu, mu_scaled, gap, scale, evaluations })
}

/// Optimal powers for a fixed energy beam: `min((l_i / a_i)^2, cap_i)`.
fn capped_powers(co: &PowerCoefficients, caps: &[f64]) -> Vec<f64> {
    co.a.iter()
        .zip(&co.l)
        .zip(caps)
        .map(|((a, l), cap)| unconstrained_power(*l, *a).min(*cap))
        .collect()
}

/// Initial powers and beam: every user at its budget under the isotropic
/// beam, or under the dominant common direction if that activates more users.
fn initial_point(sub: &ActiveSubproblem, init: Option<&ActivePlan>) -> Result<(CMat, Vec<f64>)> {
    if let Some(plan) = init {
        let p = warm_powers(sub, &plan.energy_beam, &plan.powers);
        return Ok((plan.energy_beam.clone(), p));
    }
    let iso = sub.isotropic_beam();
    let caps = sub.power_caps(&iso);
    let active = caps.iter().filter(|c| **c > 0.0).count();
    if active < sub.num_users() {
        let norms: Vec<f64> = sub.wet.iter().map(|b| 1.0 / b.norm_squared().max(1e-300)).collect();
        let (_, u) = top_eigenpair(&weighted_outer_sum(&sub.wet, &norms))?;
        let w = &u * u.adjoint() * Complex64::new(sub.config.p0_max, 0.0);
        let caps_dir = sub.power_caps(&w);
        if caps_dir.iter().filter(|c| **c > 0.0).count() > active {
            return Ok((w, caps_dir));
        }
    }
    Ok((iso, caps))
}

/// Previous powers clipped to the caps of `w`. A silent user has a zero
/// receiver and would stay silent under the sweeps, so users that can
/// transmit again are restarted at their cap whenever that does not lower
/// the rate of the starting point.
fn warm_powers(sub: &ActiveSubproblem, w: &CMat, previous: &[f64]) -> Vec<f64> {
    let caps = sub.power_caps(w);
    let kept: Vec<f64> = previous.iter().zip(&caps).map(|(p, c)| p.min(*c)).collect();
    let revived: Vec<f64> = kept.iter().zip(&caps).map(|(p, c)| if *p > 0.0 { *p } else { *c }).collect();
    if revived == kept {
        return kept;
    }
    let rate = |p: &[f64]| sub.wsr_bits(&mmse_receivers(&sub.wit, p, sub.config.n0).0, p);
    if rate(&revived) >= rate(&kept) {
        revived
    } else {
        kept
    }
}

fn mse_weights(sub: &ActiveSubproblem, f: &[CVec], p: &[f64]) -> Vec<f64> {
    mse_with(f, &sub.wit, p, sub.config.n0)
        .into_iter()
        .map(|e| 1.0 / e.max(f64::MIN_POSITIVE))
        .collect()
}

/// Solves the active subproblem by block-coordinate descent.
pub fn solve_p3(sub: &ActiveSubproblem, init: Option<&ActivePlan>) -> Result<ActiveOutcome> {
    bcd(sub, init, None)
}

/// Block-coordinate descent over `(q, F, P)` with the energy beam frozen.
pub fn solve_p3_fixed_beam(sub: &ActiveSubproblem, w: &CMat, init: Option<&ActivePlan>) -> Result<ActiveOutcome> {
    let m = sub.num_antennas();
    if w.shape() != (m, m) {
        return Err(Error::contract(format!("energy beam must be {m}x{m}")));
    }
    bcd(sub, init, Some(w))
}

fn bcd(sub: &ActiveSubproblem, init: Option<&ActivePlan>, fixed_beam: Option<&CMat>) -> Result<ActiveOutcome> {
    let cfg = sub.config;
    let k = sub.num_users();
    let (mut w, mut p) = match fixed_beam {
        Some(w) => {
            let caps = sub.power_caps(w);
            let p = match init {
                Some(plan) => warm_powers(sub, w, &plan.powers),
                None => caps,
            };
            (w.clone(), p)
        }
        None => initial_point(sub, init)?,
    };
    let (mut f, mut floored) = mmse_receivers(&sub.wit, &p, cfg.n0);
    let mut q = mse_weights(sub, &f, &p);
    let mut obj = sub.wmmse(&q, &f, &p);
    let mut trace = vec![obj];
    let mut mu = init.map_or_else(|| vec![0.0; k], |plan| plan.duals.clone());
    let mut mu_scaled: Option<Vec<f64>> = None;
    let mut evaluations = 0;
    let mut converged = false;
    let mut iterations = 0;

    let mut last_delta = f64::INFINITY;
    for it in 1..=cfg.max_bcd_iters {
        iterations = it;
        let co = power_coefficients(&q, &f, sub);
        let (w_new, p_new, mu_new) = match fixed_beam {
            Some(_) => (w.clone(), capped_powers(&co, &sub.power_caps(&w)), vec![0.0; k]),
            None => {
                // early sweeps only need a gap well below the objective change
                let loose = 1e-3 * last_delta.min(obj.abs().max(1.0));
                let mut block = solve_power_beam(sub, &co, mu_scaled.as_deref(), cfg.solver.dual_tol.max(loose))?;
                evaluations += block.evaluations;
                if block.gap > cfg.solver.dual_tol && sub.wmmse(&q, &f, &block.p) > sub.wmmse(&q, &f, &p) {
                    block = solve_power_beam(sub, &co, Some(&block.mu_scaled), cfg.solver.dual_tol)?;
                    evaluations += block.evaluations;
                }
                mu_scaled = Some(block.mu_scaled);
                (block.w, block.p, block.mu)
            }
        };
        // keep the incumbent unless the block step improves it
        if sub.wmmse(&q, &f, &p_new) <= sub.wmmse(&q, &f, &p) {
            w = w_new;
            p = p_new;
            mu = mu_new;
        }
        let (f_new, fl) = mmse_receivers(&sub.wit, &p, cfg.n0);
        f = f_new;
        floored |= fl;
        q = mse_weights(sub, &f, &p);
        let new_obj = sub.wmmse(&q, &f, &p);
        trace.push(new_obj);
        last_delta = (obj - new_obj).abs();
        obj = new_obj.min(obj);
        if last_delta <= cfg.solver.bcd_tol_ratio * cfg.tol * obj.abs().max(1.0) {
            converged = true;
            break;
        }
    }

    if fixed_beam.is_none() {
        // certify the final block to full dual accuracy
        let co = power_coefficients(&q, &f, sub);
        let mut block = solve_power_beam(sub, &co, mu_scaled.as_deref(), cfg.solver.dual_tol)?;
        evaluations += block.evaluations;
        if sub.wmmse(&q, &f, &block.p) > sub.wmmse(&q, &f, &p) {
            block = solve_power_beam(sub, &co, Some(&block.mu_scaled), 1e-3 * cfg.solver.dual_tol)?;
            evaluations += block.evaluations;
        }
        if sub.wmmse(&q, &f, &block.p) <= sub.wmmse(&q, &f, &p) {
            w = block.w;
            p = block.p;
        }
        mu = block.mu;
    }

    let harvest = sub.harvested(&w);
    let caps = sub.caps_from_harvest(&harvest);
    for (pi, cap) in p.iter_mut().zip(&caps) {
        *pi = pi.min(*cap);
    }
    let inactive_users: Vec<usize> = (0..k)
        .filter(|&i| (cfg.e_initial + harvest[i]).min(cfg.e_battery) < cfg.e_circuit[i])
        .collect();
    let (f_final, fl) = mmse_receivers(&sub.wit, &p, cfg.n0);
    floored |= fl;
    let q_final = mse_weights(sub, &f_final, &p);
    let wmmse_objective = sub.wmmse(&q_final, &f_final, &p);
    let wsr_bits = sub.wsr_bits(&f_final, &p);
    let kkt = kkt_residuals(sub, &w, &p, &mu)?;
    let power_dual = kkt.power_dual;
    Ok(ActiveOutcome {
        plan: ActivePlan {
            energy_beam: w,
            receivers: f_final,
            powers: p,
            mse_weights: q_final,
            duals: mu,
            power_dual,
        },
        wmmse_objective,
        wsr_bits,
        objective_trace: trace,
        iterations,
        converged,
        inactive_users,
        kkt,
        dual_evaluations: evaluations,
        receiver_floor_applied: floored,
    })
}

/// Optimality diagnostics of `(W, P)` against the multipliers `mu`.
pub fn kkt_residuals(sub: &ActiveSubproblem, w: &CMat, p: &[f64], mu: &[f64]) -> Result<KktResiduals> {
    let et = sub.config.eta * sub.t;
    let weights: Vec<f64> = mu.iter().map(|m| m * et).collect();
    let b = weighted_outer_sum(&sub.wet, &weights);
    let trace_w = w.trace().re;
    let power_dual = if trace_w > 0.0 { (&b * w).trace().re / trace_w } else { 0.0 };
    let lambda_max = hermitian_eig(&b)?.values.first().copied().unwrap_or(0.0);
    let slack = dual_subgradient(w, p, sub);
    let complementary = mu.iter().zip(&slack).map(|(m, s)| m * s).collect();
    let sv = hermitian_eig(w)?.values;
    let s1 = sv.first().copied().unwrap_or(0.0).abs();
    let s2 = sv.get(1).copied().unwrap_or(0.0).abs();
    Ok(KktResiduals {
        power_dual,
        lambda_max,
        complementary,
        rank_ratio: if s1 > 0.0 { s2 / s1 } else { 0.0 },
        trace_gap: (trace_w - sub.config.p0_max).abs() / sub.config.p0_max,
    })
}
