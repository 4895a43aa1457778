use wpcn_core::model::{realize, Scheme, SystemConfig, TimeSearch};
use wpcn_core::{run_benchmarks, solve, solve_fixed_t, Error};

fn small(k: usize, m: usize, n: usize) -> SystemConfig {
    let mut c = SystemConfig::default().with_num_users(k).unwrap();
    c.num_hap_antennas = m;
    c.num_irs_elements = n;
    c.gr_candidates = 30;
    c
}

#[test]
fn alternation_trace_never_decreases() {
    let cfg = small(3, 3, 8);
    for seed in 0..5 {
        let ch = realize(&cfg, seed).unwrap();
        for &t in &[0.2, 0.5, 0.8] {
            for scheme in [Scheme::Proposed, Scheme::Pbo] {
                let out = solve_fixed_t(&ch, t, &cfg, scheme, seed).unwrap();
                for w in out.trace.windows(2) {
                    assert!(w[1] >= w[0] - 1e-9, "seed {seed} t {t} {scheme}: {:?}", out.trace);
                }
                assert_eq!(*out.trace.last().unwrap(), out.wsr_bits());
                if out.converged && out.trace.len() >= 2 {
                    let n = out.trace.len();
                    let last = out.trace[n - 1] - out.trace[n - 2];
                    assert!(last <= cfg.tol * out.wsr_bits().max(1.0));
                }
            }
        }
    }
}

#[test]
fn no_irs_matches_proposed_without_reflected_paths() {
    let cfg = small(2, 3, 6);
    for seed in 0..3 {
        let ch = realize(&cfg, seed).unwrap();
        let bare = ch.without_reflection();
        for &t in &[0.3, 0.6] {
            let reference = solve_fixed_t(&ch, t, &cfg, Scheme::NoIrs, seed).unwrap();
            let joint = solve_fixed_t(&bare, t, &cfg, Scheme::Proposed, seed).unwrap();
            let scale = reference.wsr_bits().max(1.0);
            // the alternation may only add rounding-level sweeps on top
            assert!(joint.wsr_bits() >= reference.wsr_bits() - 1e-9);
            assert!(joint.wsr_bits() - reference.wsr_bits() <= cfg.tol * scale);
        }
    }
}

#[test]
fn no_irs_ignores_the_surface_size() {
    let mut cfg = small(2, 3, 4);
    cfg.t_search = TimeSearch::Grid { step: 0.1 };
    let a = solve(&realize(&cfg, 9).unwrap(), &cfg, Scheme::NoIrs, 9).unwrap();
    cfg.num_irs_elements = 17;
    let b = solve(&realize(&cfg, 9).unwrap(), &cfg, Scheme::NoIrs, 9).unwrap();
    assert_eq!(a.wsr_bits.to_bits(), b.wsr_bits.to_bits());
    assert_eq!(a.t_star, b.t_star);
    assert_eq!(a.active.powers, b.active.powers);
}

#[test]
fn zero_weights_give_zero_rate_at_the_first_grid_point() {
    let mut cfg = small(2, 2, 4);
    cfg.weights = vec![0.0; 2];
    let ch = realize(&cfg, 1).unwrap();
    let report = solve(&ch, &cfg, Scheme::Proposed, 1).unwrap();
    assert_eq!(report.wsr_bits, 0.0);
    assert!((report.t_star - 0.05).abs() < 1e-12);
    assert!(report.t_evaluations.iter().all(|(_, w)| *w == 0.0));
}

#[test]
fn unreachable_circuit_energy_silences_everyone() {
    let mut cfg = small(2, 2, 4);
    cfg.e_circuit = vec![0.5; 2];
    let ch = realize(&cfg, 2).unwrap();
    let report = solve(&ch, &cfg, Scheme::Proposed, 2).unwrap();
    assert_eq!(report.wsr_bits, 0.0);
    assert_eq!(report.inactive_users, vec![0, 1]);
    assert!(report.active.powers.iter().all(|p| *p == 0.0));
}

fn fine_grid_best(ch: &wpcn_core::ChannelSet, cfg: &SystemConfig, scheme: Scheme, seed: u64) -> (f64, f64) {
    let (mut best_t, mut best) = (0.0, f64::NEG_INFINITY);
    for k in 1..1000 {
        let t = k as f64 * 1e-3;
        let w = solve_fixed_t(ch, t, cfg, scheme, seed).unwrap().wsr_bits();
        if w > best {
            best = w;
            best_t = t;
        }
    }
    (best_t, best)
}

#[test]
fn golden_refinement_locates_the_fine_grid_optimum() {
    // one user without reflection: each t has a unique optimum, so warm and
    // cold starts agree and the search must find the grid's best split
    let mut cfg = small(1, 2, 3);
    cfg.e_circuit = vec![0.0];
    for seed in 0..2 {
        let ch = realize(&cfg, seed).unwrap();
        let report = solve(&ch, &cfg, Scheme::NoIrs, seed).unwrap();
        let (best_t, best) = fine_grid_best(&ch, &cfg, Scheme::NoIrs, seed);
        assert!((report.t_star - best_t).abs() <= 2e-3, "seed {seed}: golden {} grid {best_t}", report.t_star);
        assert!(report.wsr_bits >= best - 1e-6 * best.max(1.0));
    }
}

#[test]
fn time_search_is_no_worse_than_a_fine_grid_of_cold_starts() {
    let mut cfg = small(1, 2, 3);
    cfg.e_circuit = vec![0.0];
    for seed in 0..2 {
        let ch = realize(&cfg, seed).unwrap();
        let report = solve(&ch, &cfg, Scheme::Proposed, seed).unwrap();
        let (best_t, best) = fine_grid_best(&ch, &cfg, Scheme::Proposed, seed);
        assert!(report.wsr_bits >= best - 1e-6 * best.max(1.0), "seed {seed}: {} at {} vs {best} at {best_t}", report.wsr_bits, report.t_star);
    }
}

#[test]
fn best_time_split_beats_its_coarse_neighbours() {
    let cfg = small(2, 3, 6);
    for seed in 0..3 {
        let ch = realize(&cfg, seed).unwrap();
        let report = solve(&ch, &cfg, Scheme::Proposed, seed).unwrap();
        for t in [report.t_star - 0.05, report.t_star + 0.05] {
            if t > 0.0 && t < 1.0 {
                let w = solve_fixed_t(&ch, t, &cfg, Scheme::Proposed, seed).unwrap().wsr_bits();
                assert!(report.wsr_bits >= w - 1e-9, "seed {seed}: t* {} gives {} but t {t} gives {w}", report.t_star, report.wsr_bits);
            }
        }
    }
}

#[test]
fn solve_is_deterministic() {
    let mut cfg = small(2, 3, 6);
    cfg.t_search = TimeSearch::Grid { step: 0.1 };
    let ch = realize(&cfg, 4).unwrap();
    for scheme in Scheme::ALL {
        let a = solve(&ch, &cfg, scheme, 4).unwrap();
        let b = solve(&ch, &cfg, scheme, 4).unwrap();
        assert_eq!(a.wsr_bits.to_bits(), b.wsr_bits.to_bits());
        assert_eq!(a.t_star.to_bits(), b.t_star.to_bits());
        assert_eq!(a.active.energy_beam, b.active.energy_beam);
        assert_eq!(a.phases, b.phases);
        assert_eq!(a.t_evaluations, b.t_evaluations);
    }
}

#[test]
fn joint_design_dominates_on_average() {
    let mut cfg = small(3, 4, 12);
    cfg.t_search = TimeSearch::Grid { step: 0.1 };
    let mut sums = [0.0; 4];
    let runs = 6;
    for seed in 0..runs {
        let ch = realize(&cfg, seed).unwrap();
        let reports = run_benchmarks(&ch, &cfg, seed).unwrap();
        for (s, r) in sums.iter_mut().zip(&reports) {
            *s += r.wsr_bits;
        }
        // the same channels and initial phases; the joint design has every freedom
        assert!(reports[0].wsr_bits >= reports[3].wsr_bits - 1e-9, "seed {seed}");
    }
    assert!(sums[0] > sums[1] && sums[1] > sums[2] && sums[2] > sums[3], "{sums:?}");
}

#[test]
fn rejects_time_split_outside_the_open_interval() {
    let cfg = small(1, 2, 2);
    let ch = realize(&cfg, 0).unwrap();
    for t in [0.0, 1.0, -0.1, f64::NAN] {
        assert!(matches!(solve_fixed_t(&ch, t, &cfg, Scheme::Proposed, 0), Err(Error::Domain(_))));
    }
}
