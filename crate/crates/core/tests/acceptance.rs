//! Acceptance suite: one line per criterion. The long sweeps run only with
//! `WPCN_ACCEPTANCE_FULL=1`; `WPCN_ACCEPTANCE_DIR` keeps their output for
//! resumption and `WPCN_ACCEPTANCE_JOBS` sets the worker count.

use wpcn_core::experiments::acceptance::{run_acceptance, AcceptanceOptions, Status, KNOWN_SHORTFALLS};

fn main() {
    let mut opts = AcceptanceOptions::default();
    opts.full = std::env::var("WPCN_ACCEPTANCE_FULL").is_ok_and(|v| v == "1");
    if let Ok(dir) = std::env::var("WPCN_ACCEPTANCE_DIR") {
        opts.work_dir = dir.into();
    } else {
        opts.work_dir = std::env::temp_dir().join(format!("wpcn-acceptance-{}", std::process::id()));
    }
    if let Some(jobs) = std::env::var("WPCN_ACCEPTANCE_JOBS").ok().and_then(|v| v.parse().ok()) {
        opts.jobs = jobs;
    }
    println!("acceptance suite ({} mode, {} jobs)", if opts.full { "full" } else { "quick" }, opts.jobs);
    let results = run_acceptance(&opts, &[], |r| println!("{r}"));
    if std::env::var("WPCN_ACCEPTANCE_DIR").is_err() {
        let _ = std::fs::remove_dir_all(&opts.work_dir);
    }
    let failed = results.iter().filter(|r| r.status == Status::Fail).count();
    let unexpected = results.iter().filter(|r| r.status == Status::Fail && !KNOWN_SHORTFALLS.contains(&r.id)).count();
    let skipped = results.iter().filter(|r| r.status == Status::Skip).count();
    println!(
        "{} passed, {failed} failed ({} known shortfalls), {skipped} skipped",
        results.len() - failed - skipped,
        failed - unexpected
    );
    if unexpected > 0 {
        std::process::exit(1);
    }
}
