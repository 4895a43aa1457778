//! Physical-layer metrics: harvested energy, SINR, rates and MSEs.
//!
//! The `*_with` variants take precomputed effective channels and are what
//! the optimizers call in their inner loops.

use std::f64::consts::LN_2;

use num_complex::Complex64;

use super::channel::ChannelSet;
use super::config::SystemConfig;
use crate::{CMat, CVec, Error, Result};

/// Below this, a noise floor is substituted in the MMSE receiver.
pub const NOISE_FLOOR: f64 = 1e-15;

fn dot(a: &CVec, b: &CVec) -> Complex64 {
    // a^H b
    a.dotc(b)
}

/// `eta t b_i^H W b_i` per user.
pub fn harvested_energy_with(w: &CMat, wet_channels: &[CVec], t: f64, eta: f64) -> Vec<f64> {
    wet_channels
        .iter()
        .map(|b| {
            let wb = w * b;
            (eta * t * dot(b, &wb).re).max(0.0)
        })
        .collect()
}

/// Energy harvested by each user during the WET phase (J).
pub fn harvested_energy(w: &CMat, wet: &CVec, channels: &ChannelSet, t: f64, eta: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain(format!("t must lie in [0, 1], got {t}")));
    }
    let m = channels.num_antennas();
    if w.shape() != (m, m) {
        return Err(Error::contract(format!("W must be {m}x{m}")));
    }
    Ok(harvested_energy_with(w, &channels.effective_channels(wet)?, t, eta))
}

/// Battery level available for the WIT phase: `min(E0 + E1, Emax)`.
pub fn usable_energy(harvested: &[f64], config: &SystemConfig) -> Vec<f64> {
    harvested
        .iter()
        .map(|e1| (config.e_initial + e1).min(config.e_battery))
        .collect()
}

/// Per-user SINR with receivers `F` and effective uplink channels.
pub fn sinr_with(receivers: &[CVec], wit_channels: &[CVec], powers: &[f64], n0: f64) -> Vec<f64> {
    let k = wit_channels.len();
    (0..k)
        .map(|i| {
            if powers[i] <= 0.0 {
                return 0.0;
            }
            let f = &receivers[i];
            let signal = dot(f, &wit_channels[i]).norm_sqr() * powers[i];
            let interference: f64 = (0..k)
                .filter(|&j| j != i)
                .map(|j| dot(f, &wit_channels[j]).norm_sqr() * powers[j])
                .sum();
            let denom = interference + f.norm_squared() * n0;
            if denom > 0.0 {
                signal / denom
            } else {
                // zero receiver: defined limit
                0.0
            }
        })
        .collect()
}

pub fn sinr(
    receivers: &[CVec],
    wit: &CVec,
    channels: &ChannelSet,
    powers: &[f64],
    n0: f64,
) -> Result<Vec<f64>> {
    check_users(channels, receivers.len(), powers.len())?;
    if powers.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::contract("powers must be nonnegative"));
    }
    Ok(sinr_with(receivers, &channels.effective_channels(wit)?, powers, n0))
}

/// Unweighted rates `(1 - t) log2(1 + gamma_i)` in bits.
pub fn rates_from_sinr(gamma: &[f64], t: f64) -> Vec<f64> {
    gamma.iter().map(|g| (1.0 - t) * g.ln_1p() / LN_2).collect()
}

/// Weighted sum rate in bits.
pub fn wsr(
    receivers: &[CVec],
    wit: &CVec,
    channels: &ChannelSet,
    powers: &[f64],
    t: f64,
    config: &SystemConfig,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain(format!("t must lie in [0, 1], got {t}")));
    }
    let gamma = sinr(receivers, wit, channels, powers, config.n0)?;
    Ok(weighted_sum(&rates_from_sinr(&gamma, t), &config.weights))
}

pub fn weighted_sum(values: &[f64], weights: &[f64]) -> f64 {
    values.iter().zip(weights).map(|(v, w)| v * w).sum()
}

/// Per-user MSE `|f_i^H b_i sqrt(P_i) - 1|^2 + sum_{j != i} |f_i^H b_j|^2 P_j + N0 ||f_i||^2`.
pub fn mse_with(receivers: &[CVec], wit_channels: &[CVec], powers: &[f64], n0: f64) -> Vec<f64> {
    let k = wit_channels.len();
    (0..k)
        .map(|i| {
            let f = &receivers[i];
            let own = dot(f, &wit_channels[i]) * powers[i].sqrt() - 1.0;
            let interference: f64 = (0..k)
                .filter(|&j| j != i)
                .map(|j| dot(f, &wit_channels[j]).norm_sqr() * powers[j])
                .sum();
            own.norm_sqr() + interference + n0 * f.norm_squared()
        })
        .collect()
}

pub fn mse(
    receivers: &[CVec],
    wit: &CVec,
    channels: &ChannelSet,
    powers: &[f64],
    n0: f64,
) -> Result<Vec<f64>> {
    check_users(channels, receivers.len(), powers.len())?;
    if powers.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::contract("powers must be nonnegative"));
    }
    Ok(mse_with(receivers, &channels.effective_channels(wit)?, powers, n0))
}

/// `sum_i w_i (1 - t) (q_i e_i - ln q_i - 1)` in nats.
pub fn wmmse_objective(q: &[f64], e: &[f64], t: f64, weights: &[f64]) -> Result<f64> {
    if q.len() != e.len() || q.len() != weights.len() {
        return Err(Error::contract("wmmse_objective: length mismatch"));
    }
    if let Some(bad) = q.iter().find(|x| !(**x > 0.0)) {
        return Err(Error::contract(format!("WMMSE weight must be positive, got {bad}")));
    }
    Ok(wmmse_objective_unchecked(q, e, t, weights))
}

pub(crate) fn wmmse_objective_unchecked(q: &[f64], e: &[f64], t: f64, weights: &[f64]) -> f64 {
    q.iter()
        .zip(e)
        .zip(weights)
        .map(|((q, e), w)| w * (1.0 - t) * (q * e - q.ln() - 1.0))
        .sum()
}

/// Matrix MMSE receivers `(sum_j P_j b_j b_j^H + N0 I)^{-1} b_i sqrt(P_i)`.
///
/// Returns the receivers and whether the noise floor had to be applied.
pub fn mmse_receivers(wit_channels: &[CVec], powers: &[f64], n0: f64) -> (Vec<CVec>, bool) {
    let k = wit_channels.len();
    if k == 0 {
        return (Vec::new(), false);
    }
    let m = wit_channels[0].len();
    let floored = !(n0 >= NOISE_FLOOR);
    let noise = if floored { NOISE_FLOOR } else { n0 };
    let mut cov = CMat::identity(m, m) * Complex64::new(noise, 0.0);
    for (b, &p) in wit_channels.iter().zip(powers) {
        if p > 0.0 {
            cov.ger(Complex64::new(p, 0.0), b, &b.conjugate(), Complex64::new(1.0, 0.0));
        }
    }
    let chol = cov
        .cholesky()
        .expect("noise-loaded covariance is positive definite");
    let receivers = wit_channels
        .iter()
        .zip(powers)
        .map(|(b, &p)| {
            if p > 0.0 {
                chol.solve(b) * Complex64::new(p.sqrt(), 0.0)
            } else {
                CVec::zeros(m)
            }
        })
        .collect();
    (receivers, floored)
}

fn check_users(channels: &ChannelSet, nf: usize, np: usize) -> Result<()> {
    let k = channels.num_users();
    if nf != k || np != k {
        return Err(Error::contract(format!(
            "expected {k} receivers and powers, got {nf} and {np}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::channel::{generate_channels, place_users};
    use crate::model::phases::unit_phases;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rand_cvec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> CVec {
        CVec::from_fn(n, |_, _| c(rng.random_range(-1.0..1.0) * scale, rng.random_range(-1.0..1.0) * scale))
    }

    fn table_one_instance(seed: u64) -> (SystemConfig, ChannelSet) {
        let cfg = SystemConfig::default();
        let pos = place_users(&cfg, seed);
        let ch = generate_channels(&cfg, &pos, seed).unwrap();
        (cfg, ch)
    }

    #[test]
    fn energy_zero_beam_and_aligned_beam() {
        let (cfg, ch) = table_one_instance(1);
        let v = unit_phases(&vec![0.0; 30]);
        let e = harvested_energy(&CMat::zeros(6, 6), &v, &ch, 0.4, cfg.eta).unwrap();
        assert!(e.iter().all(|x| *x == 0.0));

        let b = ch.effective_channel(&v, 0).unwrap();
        let w = &b * b.adjoint() * c(cfg.p0_max / b.norm_squared(), 0.0);
        let e = harvested_energy(&w, &v, &ch, 0.4, cfg.eta).unwrap();
        let expect = cfg.eta * cfg.p0_max * b.norm_squared() * 0.4;
        assert!((e[0] - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn energy_matches_quadratic_form_and_is_linear() {
        let (cfg, ch) = table_one_instance(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = unit_phases(&(0..30).map(|_| rng.random_range(0.0..6.28)).collect::<Vec<_>>());
        let x = CMat::from_fn(6, 3, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let w1 = &x * x.adjoint();
        let y = CMat::from_fn(6, 2, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let w2 = &y * y.adjoint();
        let t = 0.37;
        let e1 = harvested_energy(&w1, &v, &ch, t, cfg.eta).unwrap();
        let e2 = harvested_energy(&w2, &v, &ch, t, cfg.eta).unwrap();
        for i in 0..4 {
            // trace-cyclic oracle: tr(b b^H W) = b^H W b
            let b = ch.effective_channel(&v, i).unwrap();
            let direct = cfg.eta * t * (b.adjoint() * &w1 * &b)[(0, 0)].re;
            let via_trace = cfg.eta * t * ((&b * b.adjoint()) * &w1).trace().re;
            assert!((e1[i] - direct).abs() <= 1e-12 * direct);
            assert!((e1[i] - via_trace).abs() <= 1e-12 * direct);
        }
        let combo = &w1 * c(0.3, 0.0) + &w2 * c(2.0, 0.0);
        let ec = harvested_energy(&combo, &v, &ch, t, cfg.eta).unwrap();
        for i in 0..4 {
            let expect = 0.3 * e1[i] + 2.0 * e2[i];
            assert!((ec[i] - expect).abs() <= 1e-12 * expect);
        }
        // linear in t
        let eh = harvested_energy(&w1, &v, &ch, t / 2.0, cfg.eta).unwrap();
        for i in 0..4 {
            assert!((2.0 * eh[i] - e1[i]).abs() <= 1e-12 * e1[i]);
        }
        assert!(harvested_energy(&w1, &v, &ch, 1.5, cfg.eta).is_err());
    }

    #[test]
    fn usable_energy_cases() {
        let mut cfg = SystemConfig::default();
        cfg.e_initial = 0.0;
        assert_eq!(usable_energy(&[0.0], &cfg), vec![0.0]);
        cfg.e_initial = 1e-6;
        cfg.e_battery = 1e-3;
        let e = usable_energy(&[2e-6, 5e-3], &cfg);
        assert!((e[0] - 3e-6).abs() < 1e-20);
        assert_eq!(e[1], 1e-3);
    }

    #[test]
    fn sinr_single_user_and_zero_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = rand_cvec(&mut rng, 3, 1.0);
        let f = rand_cvec(&mut rng, 3, 1.0);
        let g = sinr_with(&[f.clone()], &[b.clone()], &[2.0], 0.1);
        let expect = f.dotc(&b).norm_sqr() * 2.0 / (f.norm_squared() * 0.1);
        assert!((g[0] - expect).abs() <= 1e-12 * expect);
        let g = sinr_with(&[f.clone(), f.clone()], &[b.clone(), b.clone()], &[0.0, 0.0], 0.1);
        assert_eq!(g, vec![0.0, 0.0]);
        // zero receiver with positive power: defined limit 0
        let g = sinr_with(&[CVec::zeros(3)], &[b], &[1.0], 0.1);
        assert_eq!(g, vec![0.0]);
    }

    #[test]
    fn sinr_two_users_by_hand() {
        // M = 2, fully scalar hand evaluation
        let b1 = CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0)]);
        let b2 = CVec::from_vec(vec![c(0.5, 0.5), c(-1.0, 0.0)]);
        let f1 = CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let f2 = CVec::from_vec(vec![c(0.0, 0.0), c(0.0, 2.0)]);
        let (p1, p2, n0) = (2.0, 3.0, 0.5);
        // f1^H b1 = 1, f1^H b2 = 0.5+0.5j ; f2^H b1 = conj(2j)*1j = 2, f2^H b2 = conj(2j)*(-1) = 2j
        let g1 = 1.0 * p1 / (0.5 * p2 + 1.0 * n0);
        let g2 = 4.0 * p2 / (4.0 * p1 + 4.0 * n0);
        let g = sinr_with(&[f1, f2], &[b1, b2], &[p1, p2], n0);
        assert!((g[0] - g1).abs() < 1e-12);
        assert!((g[1] - g2).abs() < 1e-12);
    }

    #[test]
    fn wsr_examples() {
        // gamma = 1 for all four users at t = 0.5 gives 2 bits
        let r = rates_from_sinr(&[1.0; 4], 0.5);
        assert!((weighted_sum(&r, &[1.0; 4]) - 2.0).abs() < 1e-15);
        let r = rates_from_sinr(&[3.0; 4], 1.0);
        assert_eq!(weighted_sum(&r, &[1.0; 4]), 0.0);
    }

    #[test]
    fn mse_degenerate_receivers() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let b: Vec<CVec> = (0..3).map(|_| rand_cvec(&mut rng, 4, 1.0)).collect();
        let f = vec![CVec::zeros(4); 3];
        assert_eq!(mse_with(&f, &b, &[1.0, 2.0, 3.0], 0.1), vec![1.0; 3]);
        assert_eq!(mse_with(&f, &b, &[0.0; 3], 0.1), vec![1.0; 3]);
    }

    #[test]
    fn mmse_identity_on_table_one() {
        let (cfg, ch) = table_one_instance(9);
        let v = unit_phases(&(0..30).map(|k| 0.1 * k as f64).collect::<Vec<_>>());
        let bt = ch.effective_channels(&v).unwrap();
        let p = vec![1e-5, 3e-5, 2e-6, 8e-6];
        let (f, floored) = mmse_receivers(&bt, &p, cfg.n0);
        assert!(!floored);
        let e = mse_with(&f, &bt, &p, cfg.n0);
        let g = sinr_with(&f, &bt, &p, cfg.n0);
        for i in 0..4 {
            assert!((e[i] * (1.0 + g[i]) - 1.0).abs() < 1e-9, "user {i}: {}", e[i] * (1.0 + g[i]));
        }
    }

    #[test]
    fn wmmse_closed_form_and_grid() {
        let e = [0.3, 0.05, 0.9];
        let w = [1.0, 2.0, 0.5];
        let t = 0.4;
        let q: Vec<f64> = e.iter().map(|x| 1.0 / x).collect();
        let got = wmmse_objective(&q, &e, t, &w).unwrap();
        let expect: f64 = e.iter().zip(&w).map(|(e, w)| w * (1.0 - t) * e.ln()).sum();
        assert!((got - expect).abs() < 1e-13);
        assert_eq!(wmmse_objective(&[1.0], &[1.0], t, &[1.0]).unwrap(), 0.0);
        // 1-D grid oracle per user
        for (ei, wi) in e.iter().zip(&w) {
            let step = 1e-3;
            let best = (1..100_000)
                .map(|k| k as f64 * step)
                .min_by(|a, b| {
                    let fa = wmmse_objective(&[*a], &[*ei], t, &[*wi]).unwrap();
                    let fb = wmmse_objective(&[*b], &[*ei], t, &[*wi]).unwrap();
                    fa.total_cmp(&fb)
                })
                .unwrap();
            assert!((best - 1.0 / ei).abs() <= step);
        }
        assert!(wmmse_objective(&[0.0], &[1.0], t, &[1.0]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn sinr_is_scale_invariant(seed in any::<u64>(), scale in 1e-3f64..1e3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b: Vec<CVec> = (0..3).map(|_| rand_cvec(&mut rng, 4, 1.0)).collect();
            let f: Vec<CVec> = (0..3).map(|_| rand_cvec(&mut rng, 4, 1.0)).collect();
            let p: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..2.0)).collect();
            let g1 = sinr_with(&f, &b, &p, 0.3);
            let ps: Vec<f64> = p.iter().map(|x| x * scale).collect();
            let g2 = sinr_with(&f, &b, &ps, 0.3 * scale);
            for (a, b) in g1.iter().zip(&g2) {
                prop_assert!((a - b).abs() <= 1e-10 * a.max(1e-300));
            }
        }

        #[test]
        fn mmse_identity_holds(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b: Vec<CVec> = (0..3).map(|_| rand_cvec(&mut rng, 4, 1.0)).collect();
            let p: Vec<f64> = (0..3).map(|_| rng.random_range(0.01..2.0)).collect();
            let (f, _) = mmse_receivers(&b, &p, 0.2);
            let e = mse_with(&f, &b, &p, 0.2);
            let g = sinr_with(&f, &b, &p, 0.2);
            for i in 0..3 {
                prop_assert!((e[i] * (1.0 + g[i]) - 1.0).abs() < 1e-9);
            }
        }
    }
}
