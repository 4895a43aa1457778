//! Acceptance checks with their stated tolerances. Each check returns a
//! status and a one-line detail; the long-running sweeps only run when
//! [`AcceptanceOptions::full`] is set and report `SKIP` otherwise.

use std::f64::consts::{LN_2, TAU};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sweep::{realization_seed, run_sweep, summarize, read_results, SummaryRow, SweepParam, SweepSpec, RESULTS_FILE};
use crate::active::{solve_p3, ActiveSubproblem};
use crate::model::{realize, unit_phases, PhasePlan, Scheme, SystemConfig, TimeSearch};
use crate::passive::{assemble_v2_sdp, build_lifted, lift};
use crate::sdp::{self, SdpProblem};
use crate::{par, solve, solve_fixed_t, CMat, CVec, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] criterion {} ({}): {}", self.status, self.id, self.name, self.detail)
    }
}

pub const CRITERIA: [(u8, &str); 9] = [
    (1, "rank-one energy beam"),
    (2, "rate-MMSE equivalence"),
    (3, "KKT and complementary slackness"),
    (4, "monotone alternation"),
    (5, "small-instance exhaustive oracle"),
    (6, "SDP solver correctness"),
    (7, "trend reproduction"),
    (8, "gain magnitudes"),
    (9, "sweep determinism across job counts"),
];

/// Criteria that fail for reasons analysed in the project notes rather than
/// through a defect: the alternation can stop at a local optimum of the
/// fixed-receiver phase step, and the gains over the benchmarks come out
/// below the expected brackets. They still print `FAIL`.
pub const KNOWN_SHORTFALLS: [u8; 2] = [5, 8];

#[derive(Debug, Clone)]
pub struct AcceptanceOptions {
    /// Run the multi-hour sweeps and the full-scale convergence check.
    pub full: bool,
    /// Worker count for independent instances and sweep cells.
    pub jobs: usize,
    /// Scratch directory; full sweeps resume from what they find here.
    pub work_dir: PathBuf,
    /// Realizations per sweep point in the full trend and gain checks.
    pub realizations: usize,
}

impl Default for AcceptanceOptions {
    fn default() -> Self {
        Self {
            full: false,
            jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
            work_dir: std::env::temp_dir().join("wpcn-acceptance"),
            realizations: 200,
        }
    }
}

/// Runs the selected criteria (all when `ids` is empty), reporting each
/// result as soon as it is known.
pub fn run_acceptance(opts: &AcceptanceOptions, ids: &[u8], mut report: impl FnMut(&CriterionResult)) -> Vec<CriterionResult> {
    let wanted = |id: u8| ids.is_empty() || ids.contains(&id);
    let mut samples: Option<std::result::Result<Vec<P3Sample>, String>> = None;
    let mut out = Vec::new();
    for (id, name) in CRITERIA {
        if !wanted(id) {
            continue;
        }
        let body = match id {
            1..=3 => {
                let s = samples.get_or_insert_with(|| p3_samples(opts.jobs).map_err(|e| e.to_string()));
                match s {
                    Ok(s) => Ok(match id {
                        1 => rank_one(s),
                        2 => rate_mmse(s),
                        _ => kkt(s),
                    }),
                    Err(e) => Err(e.clone()),
                }
            }
            4 => monotone(opts).map_err(|e| e.to_string()),
            5 => small_oracle(opts.jobs).map_err(|e| e.to_string()),
            6 => sdp_correctness().map_err(|e| e.to_string()),
            7 => trends(opts).map_err(|e| e.to_string()),
            8 => gains(opts).map_err(|e| e.to_string()),
            _ => determinism(opts).map_err(|e| e.to_string()),
        };
        let (status, detail) = body.unwrap_or_else(|e| (Status::Fail, format!("error: {e}")));
        let r = CriterionResult { id, name, status, detail };
        report(&r);
        out.push(r);
    }
    out
}

fn verdict(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

fn random_phases(rng: &mut ChaCha8Rng, n: usize) -> CVec {
    unit_phases(&(0..n).map(|_| rng.random_range(0.0..TAU)).collect::<Vec<_>>())
}

fn random_unit(rng: &mut ChaCha8Rng, m: usize) -> CVec {
    let v = CVec::from_fn(m, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let norm = v.norm();
    v / Complex64::new(norm, 0.0)
}

// ---------------------------------------------------------------- 1 to 3

/// Diagnostics of one active-step solve on a reference-network instance.
#[derive(Debug, Clone)]
struct P3Sample {
    seconds: f64,
    converged: bool,
    rank_ratio: f64,
    trace_gap: f64,
    mmse_rel_err: f64,
    power_dual_rel_err: f64,
    /// `max_i |mu_i s_i| / (P0 eta)`.
    slackness: f64,
}

const P3_INSTANCES: u64 = 100;

fn p3_samples(jobs: usize) -> Result<Vec<P3Sample>> {
    let cfg = SystemConfig::default();
    let seeds: Vec<u64> = (0..P3_INSTANCES).collect();
    par::map(&seeds, jobs, |&s| -> Result<P3Sample> {
        let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0001 ^ s);
        let ch = realize(&cfg, realization_seed(0xacce_0001, s as usize))?;
        let phases = PhasePlan::new(random_phases(&mut rng, cfg.num_irs_elements), random_phases(&mut rng, cfg.num_irs_elements))?;
        let t = rng.random_range(0.1..0.9);
        let sub = ActiveSubproblem::new(&ch, &phases, t, &cfg)?;
        let start = Instant::now();
        let out = solve_p3(&sub, None)?;
        let seconds = start.elapsed().as_secs_f64();
        let k = &out.kkt;
        let converted = -out.wmmse_objective / LN_2;
        let lambda = k.lambda_max;
        Ok(P3Sample {
            seconds,
            converged: out.converged,
            rank_ratio: k.rank_ratio,
            trace_gap: k.trace_gap,
            mmse_rel_err: (converted - out.wsr_bits).abs() / out.wsr_bits.abs().max(f64::MIN_POSITIVE),
            power_dual_rel_err: if lambda > 0.0 { (k.power_dual - lambda).abs() / lambda } else { k.power_dual.abs() },
            slackness: k.complementary.iter().fold(0.0f64, |a, v| a.max(v.abs())) / (cfg.p0_max * cfg.eta),
        })
    })
    .into_iter()
    .collect()
}

fn worst(samples: &[P3Sample], f: impl Fn(&P3Sample) -> f64) -> f64 {
    samples.iter().map(f).fold(0.0, f64::max)
}

fn rank_one(s: &[P3Sample]) -> (Status, String) {
    let rank = worst(s, |x| x.rank_ratio);
    let trace = worst(s, |x| x.trace_gap);
    let time = worst(s, |x| x.seconds);
    let unconverged = s.iter().filter(|x| !x.converged).count();
    (
        verdict(rank <= 1e-8 && trace <= 1e-8 && time < 5.0),
        format!(
            "{} instances: max s2/s1 {rank:.2e} (<= 1e-8), max |tr W - P0|/P0 {trace:.2e} (<= 1e-8), slowest {time:.2} s (< 5 s), {unconverged} hit the sweep cap",
            s.len()
        ),
    )
}

fn rate_mmse(s: &[P3Sample]) -> (Status, String) {
    let err = worst(s, |x| x.mmse_rel_err);
    (verdict(err <= 1e-8), format!("{} instances: max relative error {err:.2e} (<= 1e-8)", s.len()))
}

fn kkt(s: &[P3Sample]) -> (Status, String) {
    let mu0 = worst(s, |x| x.power_dual_rel_err);
    let cs = worst(s, |x| x.slackness);
    (
        verdict(mu0 <= 1e-5 && cs <= 1e-5),
        format!("{} instances: max |mu0 - lambda1|/lambda1 {mu0:.2e} (<= 1e-5), max |mu_i s_i|/(P0 eta) {cs:.2e} (<= 1e-5)", s.len()),
    )
}

// ---------------------------------------------------------------- 4

const MONOTONE_FULL: usize = 100;
const MONOTONE_QUICK: usize = 3;

fn monotone(opts: &AcceptanceOptions) -> Result<(Status, String)> {
    let cfg = SystemConfig::default();
    let n = if opts.full { MONOTONE_FULL } else { MONOTONE_QUICK };
    let realizations: Vec<usize> = (0..n).collect();
    let start = Instant::now();
    // the reported t* run is warm-started by the time search; iterations are
    // counted on a cold alternation at the same t, as the algorithm runs alone
    let runs = par::map(&realizations, opts.jobs, |&r| -> Result<(bool, usize)> {
        let seed = realization_seed(0xacce_0004, r);
        let ch = realize(&cfg, seed)?;
        let report = solve(&ch, &cfg, Scheme::Proposed, seed)?;
        let cold = solve_fixed_t(&ch, report.t_star, &cfg, Scheme::Proposed, seed)?;
        let monotone = |trace: &[f64]| trace.windows(2).all(|w| w[1] >= w[0] - 1e-9);
        Ok((monotone(&report.objective_trace) && monotone(&cold.trace), cold.outer_iters))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let minutes = start.elapsed().as_secs_f64() / 60.0;
    let violations = runs.iter().filter(|r| !r.0).count();
    let mut iters: Vec<usize> = runs.iter().map(|r| r.1).collect();
    iters.sort_unstable();
    let median = if n % 2 == 1 { iters[n / 2] as f64 } else { (iters[n / 2 - 1] + iters[n / 2]) as f64 / 2.0 };
    let detail = format!(
        "{n} realizations: {violations} non-monotone traces (slack 1e-9), median outer iterations {median} (<= 20), wall time {minutes:.1} min (<= 30) with {} jobs",
        opts.jobs
    );
    if !opts.full {
        let status = if violations > 0 { Status::Fail } else { Status::Skip };
        return Ok((status, format!("{detail}; the {MONOTONE_FULL}-realization check needs the full run (about 30 single-core minutes)")));
    }
    Ok((verdict(violations == 0 && median <= 20.0 && minutes <= 30.0), detail))
}

// ---------------------------------------------------------------- 5

const ORACLE_INSTANCES: usize = 20;
const PHASE_LEVELS: usize = 16;

/// Exhaustive WSR for one user: `t` on a 0.01 grid and 16-level phases on
/// both reflection vectors. With one user the MMSE receiver is matched, the
/// best energy beam is maximum-ratio with harvest `eta t P0 |b|^2`, and the
/// rate grows with the power, so the best point of any power grid is its
/// top point, the energy cap.
fn exhaustive_single_user(ch: &crate::ChannelSet, cfg: &SystemConfig) -> Result<f64> {
    let n = ch.num_elements();
    let levels: Vec<f64> = (0..PHASE_LEVELS).map(|l| l as f64 * TAU / PHASE_LEVELS as f64).collect();
    let mut gains = Vec::new();
    let mut idx = vec![0usize; n];
    loop {
        let v = unit_phases(&idx.iter().map(|&l| levels[l]).collect::<Vec<_>>());
        gains.push(ch.effective_channel(&v, 0)?.norm_squared());
        let mut d = 0;
        while d < n && idx[d] + 1 == PHASE_LEVELS {
            idx[d] = 0;
            d += 1;
        }
        if d == n {
            break;
        }
        idx[d] += 1;
    }
    let w = cfg.weights[0];
    let mut best = 0.0f64;
    for step in 1..100 {
        let t = step as f64 * 1e-2;
        for &wet in &gains {
            let usable = (cfg.e_initial + cfg.eta * t * cfg.p0_max * wet).min(cfg.e_battery);
            let p = (usable - cfg.e_circuit[0]).max(0.0) / (1.0 - t);
            for &wit in &gains {
                best = best.max(w * (1.0 - t) * (p * wit / cfg.n0).ln_1p() / LN_2);
            }
        }
    }
    Ok(best)
}

fn small_oracle(jobs: usize) -> Result<(Status, String)> {
    let mut cfg = SystemConfig::default().with_num_users(1)?;
    cfg.num_hap_antennas = 2;
    cfg.num_irs_elements = 2;
    let seeds: Vec<usize> = (0..ORACLE_INSTANCES).collect();
    let errs = par::map(&seeds, jobs, |&r| -> Result<f64> {
        let seed = realization_seed(0xacce_0005, r);
        let ch = realize(&cfg, seed)?;
        let got = solve(&ch, &cfg, Scheme::Proposed, seed)?.wsr_bits;
        let oracle = exhaustive_single_user(&ch, &cfg)?;
        Ok((got - oracle) / oracle.max(f64::MIN_POSITIVE))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let worst = errs.iter().copied().fold(0.0f64, |a, e| a.max(e.abs()));
    let lo = errs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = errs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((
        verdict(worst <= 0.01),
        format!("{ORACLE_INSTANCES} instances: relative difference to exhaustive search in [{lo:+.2e}, {hi:+.2e}] (|.| <= 1e-2)"),
    ))
}

// ---------------------------------------------------------------- 6

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Two-by-two programs with closed-form optima `(problem, value, X*)`.
fn analytic_cases() -> Vec<(&'static str, SdpProblem, f64, Option<CMat>)> {
    let mut cases = Vec::new();
    let mut p = SdpProblem::new(2).with_objective(CMat::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]));
    p.add_unit_diagonal(0..2);
    cases.push(("real cut", p, -2.0, Some(CMat::from_row_slice(2, 2, &[c(1., 0.), c(-1., 0.), c(-1., 0.), c(1., 0.)]))));
    let mut p = SdpProblem::new(2).with_objective(CMat::from_row_slice(2, 2, &[c(0., 0.), c(0., 1.), c(0., -1.), c(0., 0.)]));
    p.add_unit_diagonal(0..2);
    cases.push(("complex cut", p, -2.0, Some(CMat::from_row_slice(2, 2, &[c(1., 0.), c(0., -1.), c(0., 1.), c(1., 0.)]))));
    let mut p = SdpProblem::new(2).with_objective(CMat::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(3., 0.)]));
    p.add_inequality(CMat::identity(2, 2), 1.0);
    cases.push(("trace floor", p, 1.0, Some(CMat::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(0., 0.)]))));
    let mut p = SdpProblem::new(2).with_objective(CMat::from_row_slice(2, 2, &[c(2., 0.), c(1., 1.), c(1., -1.), c(2., 0.)]));
    p.add_unit_diagonal(0..2);
    // tr(CX) = 4 + 2 Re((1 - j) x12), minimized by x12 = -(1 + j)/sqrt(2)
    let s = std::f64::consts::FRAC_1_SQRT_2;
    cases.push(("unit diagonal", p, 4.0 - 2.0 * 2f64.sqrt(), Some(CMat::from_row_slice(2, 2, &[c(1., 0.), c(-s, -s), c(-s, s), c(1., 0.)]))));
    cases
}

fn sdp_correctness() -> Result<(Status, String)> {
    let mut analytic_err = 0.0f64;
    for (name, p, value, x) in analytic_cases() {
        let sol = sdp::solve(&p, 1e-9, 200)?;
        if !sol.is_optimal() {
            return Ok((Status::Fail, format!("analytic case '{name}' ended with {:?}", sol.status)));
        }
        analytic_err = analytic_err.max((sol.primal_value - value).abs());
        if let Some(x) = x {
            analytic_err = analytic_err.max((&sol.x - x).norm());
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0006);
    let (mut max_gap, mut not_optimal, mut grid_violations, mut grid_checked) = (0.0f64, 0, 0, 0);
    for inst in 0..50 {
        let n = if inst % 2 == 0 { 1 + inst / 2 % 4 } else { 5 + inst % 8 };
        let k = rng.random_range(1..=4);
        let mut cfg = SystemConfig::default().with_num_users(k)?;
        cfg.num_hap_antennas = rng.random_range(1..=6);
        cfg.num_irs_elements = n;
        let ch = realize(&cfg, rng.random())?;
        let receivers: Vec<CVec> = (0..k).map(|_| random_unit(&mut rng, cfg.num_hap_antennas) * c(rng.random_range(1e2..1e4), 0.0)).collect();
        let powers: Vec<f64> = (0..k).map(|_| rng.random_range(1e-6..1e-3)).collect();
        let u = random_unit(&mut rng, cfg.num_hap_antennas);
        let w = &u * u.adjoint() * c(cfg.p0_max, 0.0);
        let lifted = build_lifted(&ch, &receivers, &powers, &w, cfg.n0)?;
        let q: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..5.0)).collect();
        let program = assemble_v2_sdp(&lifted, &q, &cfg.weights)?;
        let sol = sdp::solve(&program.problem, cfg.solver.sdp_tol, cfg.solver.sdp_max_iters)?;
        if !sol.is_optimal() {
            not_optimal += 1;
        }
        max_gap = max_gap.max(sol.rel_gap);
        if n <= 4 {
            grid_checked += 1;
            let grid = phase_grid_minimum(&program.problem, n);
            let scale = grid.abs().max(sol.primal_value.abs()).max(f64::MIN_POSITIVE);
            if sol.primal_value > grid + 1e-9 * scale {
                grid_violations += 1;
            }
        }
    }
    Ok((
        verdict(analytic_err <= 1e-6 && max_gap <= 1e-7 && not_optimal == 0 && grid_violations == 0),
        format!(
            "analytic 2x2 max error {analytic_err:.2e} (<= 1e-6); 50 WIT-phase programs: max relative gap {max_gap:.2e} (<= 1e-7), {not_optimal} not optimal; {grid_violations} of {grid_checked} with N <= 4 above the 16-level phase grid"
        ),
    ))
}

/// Smallest `x^H C x` over `x = [v; 1]` with 16-level phases in `v`.
fn phase_grid_minimum(p: &SdpProblem, n: usize) -> f64 {
    let levels: Vec<f64> = (0..PHASE_LEVELS).map(|l| l as f64 * TAU / PHASE_LEVELS as f64).collect();
    let mut idx = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        let x = lift(&unit_phases(&idx.iter().map(|&l| levels[l]).collect::<Vec<_>>()));
        best = best.min(x.dotc(&(&p.objective * &x)).re);
        let mut d = 0;
        while d < n && idx[d] + 1 == PHASE_LEVELS {
            idx[d] = 0;
            d += 1;
        }
        if d == n {
            return best;
        }
        idx[d] += 1;
    }
}

// ---------------------------------------------------------------- 7 and 8

/// Sweep axes of the trend check, all at reference-network defaults otherwise.
pub fn trend_sweeps() -> Vec<(SweepParam, Vec<f64>)> {
    vec![
        (SweepParam::P0Dbm, vec![20.0, 25.0, 30.0, 35.0, 40.0]),
        (SweepParam::NIrs, vec![10.0, 20.0, 30.0, 40.0, 50.0, 60.0]),
        (SweepParam::MAntennas, vec![2.0, 4.0, 6.0, 8.0, 10.0]),
        (SweepParam::KUsers, vec![2.0, 4.0, 6.0, 8.0, 10.0]),
        (SweepParam::DC, vec![5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0]),
    ]
}

const SWEEP_SEED: u64 = 2024;

fn full_sweep(opts: &AcceptanceOptions, param: SweepParam, values: &[f64]) -> Result<Vec<SummaryRow>> {
    let spec = SweepSpec {
        param,
        values: values.to_vec(),
        realizations: opts.realizations,
        schemes: Scheme::ALL.to_vec(),
        base_seed: SWEEP_SEED,
    };
    let dir = opts.work_dir.join(format!("sweep_{}_{}", param.name(), opts.realizations));
    let outcome = run_sweep(&spec, &SystemConfig::default(), &dir, opts.jobs)?;
    Ok(summarize(&read_results(&outcome.results_path)?))
}

fn means(rows: &[SummaryRow], scheme: Scheme) -> Vec<f64> {
    rows.iter().filter(|r| r.scheme == scheme).map(|r| r.mean_wsr_bits).collect()
}

fn skip_long(what: &str) -> (Status, String) {
    (
        Status::Skip,
        format!("{what}; needs the full run (tens of single-core hours, scales with worker count)"),
    )
}

fn trends(opts: &AcceptanceOptions) -> Result<(Status, String)> {
    if !opts.full {
        return Ok(skip_long("five sweeps x 4 schemes x 200 realizations"));
    }
    let mut failures = Vec::new();
    let mut failed_cells = 0;
    for (param, values) in trend_sweeps() {
        let rows = full_sweep(opts, param, &values)?;
        failed_cells += rows.iter().map(|r| r.failed).sum::<usize>();
        let proposed = means(&rows, Scheme::Proposed);
        let decreasing = param == SweepParam::DC;
        let monotone = proposed.windows(2).all(|w| if decreasing { w[1] < w[0] } else { w[1] > w[0] });
        if !monotone {
            failures.push(format!("{param}: proposed means {proposed:.3?} not strictly {}", if decreasing { "decreasing" } else { "increasing" }));
        }
        let (pbo, abo, bare) = (means(&rows, Scheme::Pbo), means(&rows, Scheme::Abo), means(&rows, Scheme::NoIrs));
        for (i, v) in values.iter().enumerate() {
            if !(proposed[i] > pbo[i] && pbo[i] > abo[i] && abo[i] >= bare[i]) {
                failures.push(format!(
                    "{param}={v}: means {:.3}/{:.3}/{:.3}/{:.3} out of order",
                    proposed[i], pbo[i], abo[i], bare[i]
                ));
            }
        }
    }
    let detail = if failures.is_empty() {
        format!("all five sweeps at {} realizations follow the expected trends and ordering ({failed_cells} failed cells)", opts.realizations)
    } else {
        format!("{} violations ({failed_cells} failed cells): {}", failures.len(), failures.join("; "))
    };
    Ok((verdict(failures.is_empty()), detail))
}

/// Mean over sweep points of the per-point gain `mean(proposed)/mean(other) - 1`.
pub fn mean_gain(rows: &[SummaryRow], other: Scheme) -> f64 {
    let a = means(rows, Scheme::Proposed);
    let b = means(rows, other);
    a.iter().zip(&b).map(|(a, b)| a / b - 1.0).sum::<f64>() / a.len().max(1) as f64
}

fn gains(opts: &AcceptanceOptions) -> Result<(Status, String)> {
    if !opts.full {
        return Ok(skip_long("surface-size sweep x 4 schemes x 200 realizations"));
    }
    let (param, values) = trend_sweeps().remove(1);
    let rows = full_sweep(opts, param, &values)?;
    let g = [Scheme::Pbo, Scheme::Abo, Scheme::NoIrs].map(|s| mean_gain(&rows, s));
    let brackets = [(0.10, 0.50), (1.20, 3.50), (2.20, 6.00)];
    let ok = g.iter().zip(&brackets).all(|(g, (lo, hi))| g >= lo && g <= hi);
    Ok((
        verdict(ok),
        format!(
            "mean gain over PBO {:.1}% (10-50%), over ABO {:.1}% (120-350%), over no-IRS {:.1}% (220-600%)",
            100.0 * g[0],
            100.0 * g[1],
            100.0 * g[2]
        ),
    ))
}

// ---------------------------------------------------------------- 9

/// Small network used for the determinism check.
pub fn determinism_config() -> SystemConfig {
    let mut cfg = SystemConfig::default().with_num_users(2).expect("two users are valid");
    cfg.num_hap_antennas = 2;
    cfg.num_irs_elements = 3;
    cfg.gr_candidates = 10;
    cfg.t_search = TimeSearch::Grid { step: 0.1 };
    cfg
}

fn determinism(opts: &AcceptanceOptions) -> Result<(Status, String)> {
    let spec = SweepSpec {
        param: SweepParam::NIrs,
        values: vec![2.0, 4.0],
        realizations: 2,
        schemes: Scheme::ALL.to_vec(),
        base_seed: 7,
    };
    let cfg = determinism_config();
    let many = opts.jobs.max(3);
    let mut files = Vec::new();
    for jobs in [1, many] {
        let dir = opts.work_dir.join(format!("determinism_jobs{jobs}"));
        clear_dir(&dir)?;
        run_sweep(&spec, &cfg, &dir, jobs)?;
        let path = dir.join(RESULTS_FILE);
        files.push(fs::read(&path).map_err(|e| crate::Error::io(&path, e))?);
    }
    let same = files[0] == files[1];
    Ok((
        verdict(same),
        format!(
            "{} cells with 1 and {many} jobs{}: results.csv {}",
            spec.num_cells(),
            if par::parallel_enabled() { "" } else { " (sequential build)" },
            if same { "byte-identical" } else { "differs" }
        ),
    ))
}

fn clear_dir(dir: &Path) -> Result<()> {
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| crate::Error::io(dir, e))?;
    }
    Ok(())
}
