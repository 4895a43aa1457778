//! Alternating optimization at fixed `t`, the search over `t`, and the
//! benchmark schemes.

use num_complex::Complex64;
use rand::Rng;

use crate::active::{solve_p3, solve_p3_fixed_beam, ActiveOutcome, ActiveSubproblem};
use crate::model::metrics;
use crate::model::rng::{mix64, stream_rng, Stream};
use crate::model::{
    unit_phases, ActivePlan, ChannelSet, PhaseInit, PhasePlan, Scheme, SolveReport, SystemConfig, TimeSearch,
};
use crate::numerics::golden_section;
use crate::passive::solve_passive;
use crate::{CMat, Error, Result};

/// Which blocks a scheme optimizes and how the others are fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchemeSpec {
    pub kind: Scheme,
    /// Energy beam frozen at `(P0 / M) I`.
    pub isotropic_energy_beam: bool,
    /// Reflection phases optimized by the passive step.
    pub optimize_phases: bool,
    /// Reflected paths present.
    pub reflection: bool,
}

impl SchemeSpec {
    pub fn of(kind: Scheme) -> Self {
        match kind {
            Scheme::Proposed => Self { kind, isotropic_energy_beam: false, optimize_phases: true, reflection: true },
            Scheme::Pbo => Self { kind, isotropic_energy_beam: true, optimize_phases: true, reflection: true },
            Scheme::Abo => Self { kind, isotropic_energy_beam: false, optimize_phases: false, reflection: true },
            Scheme::NoIrs => Self { kind, isotropic_energy_beam: false, optimize_phases: false, reflection: false },
        }
    }
}

/// Result of the alternation at one `t`.
#[derive(Debug, Clone)]
pub struct FixedTOutcome {
    pub t: f64,
    pub active: ActiveOutcome,
    pub phases: PhasePlan,
    /// WSR in bits after the initial active step and after every accepted
    /// alternation.
    pub trace: Vec<f64>,
    pub outer_iters: usize,
    pub converged: bool,
    /// Messages from passive steps that kept their incumbent.
    pub diagnostics: Vec<String>,
}

impl FixedTOutcome {
    pub fn wsr_bits(&self) -> f64 {
        self.active.wsr_bits
    }
}

fn random_plan(n: usize, seed: u64, key: u32) -> PhasePlan {
    let mut rng = stream_rng(seed, Stream::SchemePhases(key));
    let mut draw = || unit_phases(&(0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect::<Vec<_>>());
    let wet = draw();
    let wit = draw();
    PhasePlan { wet, wit }
}

/// Starting reflection vectors of a scheme for one realization.
pub fn initial_phases(spec: SchemeSpec, n: usize, config: &SystemConfig, seed: u64) -> PhasePlan {
    match spec.kind {
        Scheme::Abo => random_plan(n, seed, Scheme::Abo.index()),
        Scheme::NoIrs => PhasePlan::ones(n),
        Scheme::Proposed | Scheme::Pbo => match config.phase_init {
            PhaseInit::Ones => PhasePlan::ones(n),
            // shared by both optimizing schemes so they start from the same point
            PhaseInit::Random => random_plan(n, seed, 16),
        },
    }
}

fn isotropic(config: &SystemConfig) -> CMat {
    let m = config.num_hap_antennas;
    CMat::identity(m, m) * Complex64::new(config.p0_max / m as f64, 0.0)
}

fn active_step(
    channels: &ChannelSet,
    phases: &PhasePlan,
    t: f64,
    config: &SystemConfig,
    spec: SchemeSpec,
    warm: Option<&ActivePlan>,
) -> Result<ActiveOutcome> {
    let sub = ActiveSubproblem::new(channels, phases, t, config)?;
    if spec.isotropic_energy_beam {
        solve_p3_fixed_beam(&sub, &isotropic(config), warm)
    } else {
        solve_p3(&sub, warm)
    }
}

fn randomization_key(spec: SchemeSpec, t: f64, iteration: usize) -> u64 {
    mix64(mix64(t.to_bits() ^ u64::from(spec.kind.index())) ^ iteration as u64)
}

/// Alternates the active and reflection steps at fixed `t` until the WSR
/// gain drops below `tol * max(1, WSR)` or `max_outer_iters` is reached.
/// `seed` is the realization seed; it fixes benchmark phases and the
/// randomization streams.
pub fn solve_fixed_t(channels: &ChannelSet, t: f64, config: &SystemConfig, scheme: Scheme, seed: u64) -> Result<FixedTOutcome> {
    solve_fixed_t_from(channels, t, config, scheme, seed, None)
}

fn solve_fixed_t_from(
    channels: &ChannelSet,
    t: f64,
    config: &SystemConfig,
    scheme: Scheme,
    seed: u64,
    warm: Option<(&ActivePlan, &PhasePlan)>,
) -> Result<FixedTOutcome> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::domain(format!("t must lie in (0, 1), got {t}")));
    }
    let spec = SchemeSpec::of(scheme);
    let stripped;
    let channels = if spec.reflection {
        channels
    } else {
        stripped = channels.without_reflection();
        &stripped
    };
    let mut phases = match warm {
        Some((_, ph)) if spec.optimize_phases => ph.clone(),
        _ => initial_phases(spec, channels.num_elements(), config, seed),
    };
    let mut active = active_step(channels, &phases, t, config, spec, warm.map(|(p, _)| p))?;
    let mut trace = vec![active.wsr_bits];
    let mut diagnostics = Vec::new();
    if !spec.optimize_phases || channels.num_elements() == 0 {
        return Ok(FixedTOutcome { t, active, phases, trace, outer_iters: 0, converged: true, diagnostics });
    }

    let mut converged = false;
    let mut outer_iters = 0;
    for it in 1..=config.max_outer_iters {
        outer_iters = it;
        let passive = solve_passive(channels, &active.plan, &phases, t, config, seed, randomization_key(spec, t, it))?;
        diagnostics.extend(passive.diagnostics.iter().cloned());
        let next = active_step(channels, &passive.phases, t, config, spec, Some(&active.plan))?;
        let gain = next.wsr_bits - active.wsr_bits;
        if gain < 0.0 {
            // both steps are descent steps; a loss is rounding, keep the incumbent
            converged = true;
            break;
        }
        phases = passive.phases;
        active = next;
        trace.push(active.wsr_bits);
        if gain <= config.tol * active.wsr_bits.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    Ok(FixedTOutcome { t, active, phases, trace, outer_iters, converged, diagnostics })
}

/// `t` values of the coarse pre-scan, `step, 2 step, ...` strictly inside `(0, 1)`.
fn scan_grid(step: f64) -> Vec<f64> {
    let count = ((1.0 / step) - 1e-9).floor() as usize;
    // rounded so that a 0.1 grid reads 0.3 rather than 0.30000000000000004
    (1..=count).map(|k| (k as f64 * step * 1e12).round() / 1e12).filter(|t| *t < 1.0 - 1e-12).collect()
}

/// Maximizes the WSR over `t` for one scheme: a coarse grid of cold starts,
/// then golden-section refinement on the bracket around the best grid point,
/// warm-started from that point.
pub fn solve(channels: &ChannelSet, config: &SystemConfig, scheme: Scheme, seed: u64) -> Result<SolveReport> {
    config.validate()?;
    let step = match config.t_search {
        TimeSearch::Golden => config.solver.t_prescan_step,
        TimeSearch::Grid { step } => step,
    };
    let grid = scan_grid(step);
    if grid.is_empty() {
        return Err(Error::InvalidConfig(format!("time grid step {step} leaves no interior point")));
    }
    let mut evaluations: Vec<(f64, f64)> = Vec::new();
    let mut best: Option<FixedTOutcome> = None;
    let mut consider = |out: FixedTOutcome, best: &mut Option<FixedTOutcome>| {
        evaluations.push((out.t, out.wsr_bits()));
        if best.as_ref().is_none_or(|b| out.wsr_bits() > b.wsr_bits()) {
            *best = Some(out);
        }
    };
    for &t in &grid {
        consider(solve_fixed_t(channels, t, config, scheme, seed)?, &mut best);
    }
    if config.t_search == TimeSearch::Golden {
        let center = best.as_ref().map(|b| b.t).expect("grid is nonempty");
        let lo = (center - step).max(0.5 * step.min(center));
        let hi = (center + step).min(1.0 - 0.5 * step.min(1.0 - center));
        // refinement points start from the incumbent so they stay in its
        // basin; a cold start at a nearby t can settle on a poorer local optimum
        let incumbent = best.as_ref().map(|b| (b.active.plan.clone(), b.phases.clone())).expect("grid is nonempty");
        let mut refined: Vec<FixedTOutcome> = Vec::new();
        golden_section(
            |t| {
                let out = solve_fixed_t_from(channels, t, config, scheme, seed, Some((&incumbent.0, &incumbent.1)))?;
                let v = out.wsr_bits();
                refined.push(out);
                Ok(v)
            },
            lo,
            hi,
            config.solver.t_golden_tol,
        )?;
        for out in refined {
            consider(out, &mut best);
        }
    }
    let best = best.expect("at least one evaluation");
    Ok(report(channels, config, scheme, best, evaluations))
}

fn report(
    channels: &ChannelSet,
    config: &SystemConfig,
    scheme: Scheme,
    best: FixedTOutcome,
    t_evaluations: Vec<(f64, f64)>,
) -> SolveReport {
    let spec = SchemeSpec::of(scheme);
    let wit = if spec.reflection {
        channels.effective_channels(&best.phases.wit)
    } else {
        channels.without_reflection().effective_channels(&best.phases.wit)
    }
    .expect("phase plan matches the channels");
    let plan = &best.active.plan;
    let gamma = metrics::sinr_with(&plan.receivers, &wit, &plan.powers, config.n0);
    SolveReport {
        scheme,
        wsr_bits: best.active.wsr_bits,
        t_star: best.t,
        per_user_rates: metrics::rates_from_sinr(&gamma, best.t),
        outer_iters: best.outer_iters,
        objective_trace: best.trace,
        kkt_residuals: best.active.kkt.clone(),
        active: best.active.plan.clone(),
        phases: best.phases,
        inactive_users: best.active.inactive_users.clone(),
        converged: best.converged,
        t_evaluations,
    }
}

/// All four schemes on the same channels, in [`Scheme::ALL`] order.
pub fn run_benchmarks(channels: &ChannelSet, config: &SystemConfig, seed: u64) -> Result<Vec<SolveReport>> {
    Scheme::ALL.iter().map(|&s| solve(channels, config, s, seed)).collect()
}
