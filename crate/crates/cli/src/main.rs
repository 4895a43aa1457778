//! `wpcn`: single runs, seeded sweeps, plots and the acceptance suite.
//!
//! Exit codes: 0 on success, 1 for usage and input errors, 2 for numerical
//! failures (solver errors, failed sweep cells, failed acceptance criteria).

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use wpcn_core::experiments::acceptance::{run_acceptance, AcceptanceOptions, Status, KNOWN_SHORTFALLS};
use wpcn_core::experiments::sweep::SUMMARY_FILE;
use wpcn_core::experiments::{emit_plots, load_config_file, run_sweep_with_progress, ConfigFile, SweepParam, SweepSpec};
use wpcn_core::model::{realize, Scheme};
use wpcn_core::{par, solve, Error};

const SEED_ENV: &str = "WPCN_SEED";
const DEFAULT_REALIZATIONS: usize = 200;

#[derive(Parser, Debug)]
#[command(name = "wpcn", version, about = "Joint beamforming and power control for IRS-assisted wireless-powered networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one channel realization and print full diagnostics.
    Run(RunArgs),
    /// Run a seeded parameter sweep into results.csv and summary.csv.
    Sweep(SweepArgs),
    /// Draw SVG charts from a summary.csv.
    Plot(PlotArgs),
    /// Run the acceptance suite.
    Selftest(SelftestArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// TOML configuration file; missing keys take the reference-network defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed; overrides WPCN_SEED and the configuration file.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Schemes to solve, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_scheme)]
    schemes: Vec<Scheme>,
    /// Directory for run.csv with one row per scheme.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads, one scheme per worker.
    #[arg(long, default_value_t = default_jobs())]
    jobs: usize,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Output directory; an existing sweep there is resumed.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Swept parameter: p0_dbm, n_irs, d_c, m_antennas or k_users.
    #[arg(long, value_parser = parse_param)]
    param: Option<SweepParam>,
    /// Sweep values, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    values: Vec<f64>,
    /// Channel realizations per sweep value [default: 200].
    #[arg(long)]
    realizations: Option<usize>,
    /// Schemes, comma separated [default: all four].
    #[arg(long, value_delimiter = ',', value_parser = parse_scheme)]
    schemes: Vec<Scheme>,
    /// Worker threads.
    #[arg(long, default_value_t = default_jobs())]
    jobs: usize,
    /// Suppress per-cell progress on stderr.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args, Debug)]
struct PlotArgs {
    /// summary.csv, or a sweep directory containing one [default: out].
    input: Option<PathBuf>,
    /// Directory for the SVG files [default: next to the summary].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SelftestArgs {
    /// Also run the full-scale sweeps (tens of single-core hours).
    #[arg(long)]
    full: bool,
    /// Only these criteria, comma separated.
    #[arg(long, value_delimiter = ',')]
    only: Vec<u8>,
    /// Worker threads.
    #[arg(long, default_value_t = default_jobs())]
    jobs: usize,
    /// Scratch directory; full sweeps resume from it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Realizations per sweep point in the full checks.
    #[arg(long, default_value_t = DEFAULT_REALIZATIONS)]
    realizations: usize,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn parse_scheme(s: &str) -> Result<Scheme, Error> {
    s.parse()
}

fn parse_param(s: &str) -> Result<SweepParam, Error> {
    s.parse()
}

/// A failure that maps to exit code 2.
#[derive(Debug)]
struct NumericalFailure(String);

impl fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NumericalFailure {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<NumericalFailure>().is_some() {
        return 2;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::Domain(_) | Error::Contract(_) | Error::Infeasible(_) | Error::Numerical(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Plot(a) => plot(a),
        Command::Selftest(a) => selftest(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn load(common: &Common) -> anyhow::Result<(ConfigFile, u64)> {
    let file = match &common.config {
        Some(path) => load_config_file(path)?,
        None => wpcn_core::experiments::parse_config("", Path::new("<defaults>"))?,
    };
    let env_seed = match std::env::var(SEED_ENV) {
        Ok(v) => Some(v.trim().parse::<u64>().map_err(|_| anyhow!("{SEED_ENV}='{v}' is not a nonnegative integer"))?),
        Err(_) => None,
    };
    let seed = common.seed.or(env_seed).or(file.seed).unwrap_or(0);
    Ok((file, seed))
}

fn check_jobs(jobs: usize) -> anyhow::Result<()> {
    if jobs == 0 {
        return Err(anyhow!("--jobs must be at least 1"));
    }
    Ok(())
}

fn fmt_list(xs: &[f64], fmt: impl Fn(f64) -> String) -> String {
    let items: Vec<String> = xs.iter().map(|&x| fmt(x)).collect();
    format!("[{}]", items.join(", "))
}

fn run(args: RunArgs) -> anyhow::Result<()> {
    check_jobs(args.jobs)?;
    let (file, seed) = load(&args.common)?;
    let cfg = file.system;
    let schemes = if args.schemes.is_empty() { Scheme::ALL.to_vec() } else { args.schemes };
    let channels = realize(&cfg, seed)?;
    println!(
        "realization seed {seed}: K={} M={} N={} P0={:.3} W",
        cfg.num_users, cfg.num_hap_antennas, cfg.num_irs_elements, cfg.p0_max
    );
    let reports = par::map(&schemes, args.jobs, |&s| solve(&channels, &cfg, s, seed))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    for r in &reports {
        let k = &r.kkt_residuals;
        let slack = k.complementary.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        println!("\n== {} ==", r.scheme);
        println!("  wsr            {:.6} bits/s/Hz", r.wsr_bits);
        println!("  t*             {:.4}", r.t_star);
        println!("  user rates     {}", fmt_list(&r.per_user_rates, |x| format!("{x:.4}")));
        println!("  powers (W)     {}", fmt_list(&r.active.powers, |x| format!("{x:.3e}")));
        println!("  outer iters    {} ({})", r.outer_iters, if r.converged { "converged" } else { "iteration cap" });
        println!("  trace          {}", fmt_list(&r.objective_trace, |x| format!("{x:.6}")));
        println!("  inactive users {:?}", r.inactive_users);
        println!(
            "  kkt            |mu0-lambda1|/lambda1 {:.2e}, max |mu_i s_i| {:.2e}, rank ratio {:.2e}, trace gap {:.2e}",
            if k.lambda_max > 0.0 { (k.power_dual - k.lambda_max).abs() / k.lambda_max } else { 0.0 },
            slack,
            k.rank_ratio,
            k.trace_gap
        );
        println!("  t evaluations  {}", r.t_evaluations.len());
    }
    if let Some(dir) = args.out {
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut text = String::from("scheme,seed,wsr_bits,t_star,outer_iters,converged,rates\n");
        for r in &reports {
            let rates: Vec<String> = r.per_user_rates.iter().map(|x| x.to_string()).collect();
            text.push_str(&format!(
                "{},{seed},{},{},{},{},{}\n",
                r.scheme,
                r.wsr_bits,
                r.t_star,
                r.outer_iters,
                r.converged,
                rates.join(";")
            ));
        }
        let path = dir.join("run.csv");
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        println!("\nwrote {}", path.display());
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> anyhow::Result<()> {
    check_jobs(args.jobs)?;
    let (file, seed) = load(&args.common)?;
    let defaults = file.sweep;
    let param = args.param.or(defaults.param).ok_or_else(|| anyhow!("--param is required (or [sweep] param in the config)"))?;
    let values = if args.values.is_empty() { defaults.values.unwrap_or_default() } else { args.values };
    let schemes = if !args.schemes.is_empty() {
        args.schemes
    } else {
        defaults.schemes.unwrap_or_else(|| Scheme::ALL.to_vec())
    };
    let spec = SweepSpec {
        param,
        values,
        realizations: args.realizations.or(defaults.realizations).unwrap_or(DEFAULT_REALIZATIONS),
        schemes,
        base_seed: seed,
    };
    spec.validate()?;
    eprintln!(
        "sweeping {} over {:?}: {} cells, seed {seed}, {} jobs{}",
        spec.param,
        spec.values,
        spec.num_cells(),
        args.jobs,
        if par::parallel_enabled() { "" } else { " (sequential build)" }
    );
    let quiet = args.quiet;
    let outcome = run_sweep_with_progress(&spec, &file.system, &args.out, args.jobs, |row, done, total| {
        if !quiet {
            let status = match &row.error {
                None => format!("wsr {:.4} t* {:.3}", row.wsr_bits, row.t_star),
                Some(e) => format!("FAILED: {e}"),
            };
            eprintln!("[{done}/{total}] {}={} {} r{}: {status}", row.param, row.value, row.scheme, row.realization);
        }
    })?;
    println!(
        "{} computed, {} already present, {} failed; wrote {} and {}",
        outcome.computed,
        outcome.skipped,
        outcome.failed,
        outcome.results_path.display(),
        outcome.summary_path.display()
    );
    if outcome.failed > 0 {
        return Err(NumericalFailure(format!("{} sweep cells failed; see the error column of results.csv", outcome.failed)).into());
    }
    Ok(())
}

fn plot(args: PlotArgs) -> anyhow::Result<()> {
    let input = args.input.unwrap_or_else(|| PathBuf::from("out"));
    let summary = if input.is_dir() { input.join(SUMMARY_FILE) } else { input };
    let out = args.out.unwrap_or_else(|| summary.parent().map(Path::to_path_buf).unwrap_or_default());
    for path in emit_plots(&summary, &out)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn selftest(args: SelftestArgs) -> anyhow::Result<()> {
    check_jobs(args.jobs)?;
    if let Some(bad) = args.only.iter().find(|id| !(1..=9).contains(*id)) {
        return Err(anyhow!("no criterion {bad}; criteria are numbered 1 to 9"));
    }
    let mut opts = AcceptanceOptions { full: args.full, jobs: args.jobs, realizations: args.realizations, ..Default::default() };
    if let Some(dir) = args.out {
        opts.work_dir = dir;
    }
    println!("acceptance suite ({} mode, {} jobs)", if opts.full { "full" } else { "quick" }, opts.jobs);
    let results = run_acceptance(&opts, &args.only, |r| println!("{r}"));
    let failed: Vec<u8> = results.iter().filter(|r| r.status == Status::Fail).map(|r| r.id).collect();
    let unexpected: Vec<u8> = failed.iter().copied().filter(|id| !KNOWN_SHORTFALLS.contains(id)).collect();
    let skipped = results.iter().filter(|r| r.status == Status::Skip).count();
    println!(
        "{} passed, {} failed ({} known shortfalls), {skipped} skipped",
        results.len() - failed.len() - skipped,
        failed.len(),
        failed.len() - unexpected.len()
    );
    if !unexpected.is_empty() {
        return Err(NumericalFailure(format!("criteria {unexpected:?} failed")).into());
    }
    Ok(())
}
