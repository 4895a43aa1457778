use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::{distance, SystemConfig};
use super::rng::{stream_rng, Stream};
use crate::{CMat, CVec, Error, Result};

/// Distance-dependent path loss `c0 (d / d0)^(-alpha)` as a linear power gain.
pub fn path_loss(d: f64, c0: f64, d0: f64, alpha: f64) -> Result<f64> {
    if !(d > 0.0) || !(d0 > 0.0) {
        return Err(Error::domain(format!("path_loss needs positive distances, got d={d}, d0={d0}")));
    }
    if !(c0 > 0.0) {
        return Err(Error::domain(format!("path_loss needs c0 > 0, got {c0}")));
    }
    Ok(c0 * (d / d0).powf(-alpha))
}

/// Places `K` users uniformly over the disk around [`SystemConfig::wd_center`].
pub fn place_users(config: &SystemConfig, seed: u64) -> Vec<[f64; 2]> {
    let center = config.wd_center();
    (0..config.num_users)
        .map(|i| {
            let mut rng = stream_rng(seed, Stream::Position(i as u32));
            // sqrt of a uniform radius fraction makes the density area-uniform
            let r = config.wd_radius * rng.random::<f64>().sqrt();
            let theta = std::f64::consts::TAU * rng.random::<f64>();
            [center[0] + r * theta.cos(), center[1] + r * theta.sin()]
        })
        .collect()
}

/// One realization of every channel in the network, plus the lifted
/// matrices used by the reflection optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// HAP to IRS, `M x N`.
    hap_irs: CMat,
    /// IRS to user `i`, length `N`.
    irs_wd: Vec<CVec>,
    /// HAP to user `i`, length `M`.
    hap_wd: Vec<CVec>,
    /// `G diag(g_i)`, `M x N`.
    cascade: Vec<CMat>,
    /// `[G diag(g_i), a_i]`, `M x (N + 1)`.
    cascade_lifted: Vec<CMat>,
}

impl ChannelSet {
    pub fn new(hap_irs: CMat, irs_wd: Vec<CVec>, hap_wd: Vec<CVec>) -> Result<Self> {
        let (m, n) = hap_irs.shape();
        if irs_wd.len() != hap_wd.len() {
            return Err(Error::contract(format!(
                "{} IRS-user channels but {} HAP-user channels",
                irs_wd.len(),
                hap_wd.len()
            )));
        }
        if irs_wd.iter().any(|g| g.len() != n) || hap_wd.iter().any(|a| a.len() != m) {
            return Err(Error::contract("channel dimensions do not match G".to_string()));
        }
        let finite = |z: &Complex64| z.re.is_finite() && z.im.is_finite();
        if !hap_irs.iter().all(finite)
            || !irs_wd.iter().flat_map(|v| v.iter()).all(finite)
            || !hap_wd.iter().flat_map(|v| v.iter()).all(finite)
        {
            return Err(Error::domain("channel entries must be finite"));
        }
        let cascade: Vec<CMat> = irs_wd
            .iter()
            .map(|g| {
                let mut z = hap_irs.clone();
                for (col, gn) in g.iter().enumerate() {
                    for r in 0..m {
                        z[(r, col)] *= gn;
                    }
                }
                z
            })
            .collect();
        let cascade_lifted = cascade
            .iter()
            .zip(&hap_wd)
            .map(|(z, a)| {
                let mut lifted = CMat::zeros(m, n + 1);
                lifted.view_mut((0, 0), (m, n)).copy_from(z);
                lifted.set_column(n, a);
                lifted
            })
            .collect();
        Ok(Self {
            hap_irs,
            irs_wd,
            hap_wd,
            cascade,
            cascade_lifted,
        })
    }

    pub fn num_users(&self) -> usize {
        self.hap_wd.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.hap_irs.nrows()
    }

    pub fn num_elements(&self) -> usize {
        self.hap_irs.ncols()
    }

    pub fn hap_irs(&self) -> &CMat {
        &self.hap_irs
    }

    pub fn irs_wd(&self, i: usize) -> &CVec {
        &self.irs_wd[i]
    }

    pub fn hap_wd(&self, i: usize) -> &CVec {
        &self.hap_wd[i]
    }

    /// `zeta_i = G diag(g_i)`.
    pub fn cascade(&self, i: usize) -> &CMat {
        &self.cascade[i]
    }

    /// `[zeta_i, a_i]`.
    pub fn cascade_lifted(&self, i: usize) -> &CMat {
        &self.cascade_lifted[i]
    }

    /// Same network with every reflected path removed (`G = 0`).
    pub fn without_reflection(&self) -> Self {
        let (m, n) = self.hap_irs.shape();
        Self::new(CMat::zeros(m, n), self.irs_wd.clone(), self.hap_wd.clone())
            .expect("zeroing G keeps a valid channel set")
    }

    /// Diagnostic gains `(||G||^2, ||g_i||^2, ||a_i||^2)`.
    pub fn gains(&self) -> (f64, Vec<f64>, Vec<f64>) {
        (
            self.hap_irs.norm_squared(),
            self.irs_wd.iter().map(|g| g.norm_squared()).collect(),
            self.hap_wd.iter().map(|a| a.norm_squared()).collect(),
        )
    }

    /// Effective channel `zeta_i v + a_i` of user `i` under reflection vector `v`.
    pub fn effective_channel(&self, v: &CVec, i: usize) -> Result<CVec> {
        self.check_phase_len(v)?;
        if i >= self.num_users() {
            return Err(Error::contract(format!("user index {i} out of range")));
        }
        Ok(self.effective_unchecked(v, i))
    }

    /// Same as [`effective_channel`](Self::effective_channel) via the lifted
    /// matrix `[zeta_i, a_i] [v; 1]`.
    pub fn effective_channel_lifted(&self, v: &CVec, i: usize) -> Result<CVec> {
        self.check_phase_len(v)?;
        let n = self.num_elements();
        let mut vbar = CVec::zeros(n + 1);
        vbar.rows_mut(0, n).copy_from(v);
        vbar[n] = Complex64::new(1.0, 0.0);
        Ok(&self.cascade_lifted[i] * vbar)
    }

    /// Effective channels of all users.
    pub fn effective_channels(&self, v: &CVec) -> Result<Vec<CVec>> {
        self.check_phase_len(v)?;
        Ok((0..self.num_users()).map(|i| self.effective_unchecked(v, i)).collect())
    }

    pub(crate) fn effective_unchecked(&self, v: &CVec, i: usize) -> CVec {
        // G (g_i .* v) + a_i, O(MN)
        let gv = self.irs_wd[i].component_mul(v);
        &self.hap_irs * gv + &self.hap_wd[i]
    }

    fn check_phase_len(&self, v: &CVec) -> Result<()> {
        if v.len() != self.num_elements() {
            return Err(Error::contract(format!(
                "reflection vector has length {}, IRS has {} elements",
                v.len(),
                self.num_elements()
            )));
        }
        Ok(())
    }
}

fn cn_sample(rng: &mut ChaCha8Rng, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Draws one Rayleigh-fading realization: every entry is `CN(0, L)` with `L`
/// the path loss of its link. Each link (and each user) uses its own random
/// stream, so the draws of a user do not depend on `M`, `N` or `K` beyond
/// the shared prefix.
pub fn generate_channels(config: &SystemConfig, wd_positions: &[[f64; 2]], seed: u64) -> Result<ChannelSet> {
    let (m, n) = (config.num_hap_antennas, config.num_irs_elements);
    let a = config.alphas;
    let d_hi = distance(config.hap_pos, config.irs_pos);
    let pl_hi = path_loss(d_hi, config.c0, config.d0, a.hap_irs)?;

    let mut rng = stream_rng(seed, Stream::HapIrs);
    // column-major draw order keeps the first columns fixed as N grows
    let mut g = vec![Complex64::new(0.0, 0.0); m * n];
    for col in 0..n {
        for row in 0..m {
            g[col * m + row] = cn_sample(&mut rng, pl_hi);
        }
    }
    let hap_irs = CMat::from_column_slice(m, n, &g);

    let mut irs_wd = Vec::with_capacity(wd_positions.len());
    let mut hap_wd = Vec::with_capacity(wd_positions.len());
    for (i, &pos) in wd_positions.iter().enumerate() {
        let d_iw = distance(config.irs_pos, pos);
        let d_hw = distance(config.hap_pos, pos);
        if d_iw <= 0.0 || d_hw <= 0.0 {
            return Err(Error::domain(format!("user {i} coincides with the HAP or IRS")));
        }
        let pl_iw = path_loss(d_iw, config.c0, config.d0, a.irs_wd)?;
        let pl_hw = path_loss(d_hw, config.c0, config.d0, a.hap_wd)?;
        let mut rg = stream_rng(seed, Stream::IrsWd(i as u32));
        irs_wd.push(CVec::from_fn(n, |_, _| cn_sample(&mut rg, pl_iw)));
        let mut ra = stream_rng(seed, Stream::HapWd(i as u32));
        hap_wd.push(CVec::from_fn(m, |_, _| cn_sample(&mut ra, pl_hw)));
    }
    ChannelSet::new(hap_irs, irs_wd, hap_wd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::phases::unit_phases;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn path_loss_examples() {
        assert!((path_loss(1.0, 1e-2, 1.0, 3.5).unwrap() - 1e-2).abs() < 1e-18);
        assert!((path_loss(2.0, 1.0, 1.0, 2.0).unwrap() - 0.25).abs() < 1e-15);
        let v = path_loss(10.0, 1e-2, 1.0, 3.5).unwrap();
        assert!((v - 3.1623e-6).abs() < 1e-9);
        assert!(path_loss(0.0, 1.0, 1.0, 2.0).is_err());
        assert!(path_loss(-1.0, 1.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SystemConfig::default();
        let pos = place_users(&cfg, 5);
        assert_eq!(pos, place_users(&cfg, 5));
        let a = generate_channels(&cfg, &pos, 17).unwrap();
        let b = generate_channels(&cfg, &pos, 17).unwrap();
        assert_eq!(a, b);
        let c2 = generate_channels(&cfg, &pos, 18).unwrap();
        assert_ne!(a, c2);
    }

    #[test]
    fn huge_exponent_vanishes() {
        let mut cfg = SystemConfig::default();
        cfg.alphas.hap_irs = 400.0;
        cfg.alphas.irs_wd = 400.0;
        cfg.alphas.hap_wd = 400.0;
        let pos = place_users(&cfg, 1);
        let ch = generate_channels(&cfg, &pos, 3).unwrap();
        let (g0, g, h) = ch.gains();
        assert!(g0 < 1e-200 && g.iter().all(|x| *x < 1e-200) && h.iter().all(|x| *x < 1e-200));
    }

    #[test]
    fn user_draws_are_prefix_stable() {
        let cfg = SystemConfig::default();
        let pos = place_users(&cfg, 9);
        let small = generate_channels(&cfg, &pos[..2], 4).unwrap();
        let big = generate_channels(&cfg, &pos, 4).unwrap();
        assert_eq!(small.hap_wd(1), big.hap_wd(1));
        let cfg20 = SystemConfig {
            num_irs_elements: 20,
            ..cfg.clone()
        };
        let n20 = generate_channels(&cfg20, &pos, 4).unwrap();
        assert_eq!(n20.hap_irs().columns(0, 20), big.hap_irs().columns(0, 20));
        assert_eq!(n20.hap_wd(3), big.hap_wd(3));
    }

    #[test]
    fn degenerate_disk() {
        let cfg = SystemConfig {
            wd_radius: 0.0,
            ..SystemConfig::default()
        };
        for p in place_users(&cfg, 42) {
            assert_eq!(p, [8.0, 0.0]);
        }
    }

    #[test]
    fn effective_channel_special_cases() {
        let g = CMat::from_row_slice(2, 2, &[c(1.0, 0.5), c(-0.3, 0.2), c(0.0, 1.0), c(2.0, 0.0)]);
        let gi = CVec::from_vec(vec![c(0.5, -0.5), c(1.0, 1.0)]);
        let ai = CVec::from_vec(vec![c(0.1, 0.0), c(0.0, -0.2)]);
        // g_i = 0 leaves only the direct path
        let ch = ChannelSet::new(g.clone(), vec![CVec::zeros(2)], vec![ai.clone()]).unwrap();
        let v = unit_phases(&[0.3, 1.9]);
        assert_eq!(ch.effective_channel(&v, 0).unwrap(), ai);
        // a_i = 0 and v = 1 gives G g_i
        let ch = ChannelSet::new(g.clone(), vec![gi.clone()], vec![CVec::zeros(2)]).unwrap();
        let ones = unit_phases(&[0.0, 0.0]);
        let got = ch.effective_channel(&ones, 0).unwrap();
        assert!((got - &g * &gi).norm() < 1e-15);
        // wrong length is a contract violation
        assert!(ch.effective_channel(&CVec::zeros(3), 0).is_err());
    }

    #[test]
    fn lifted_form_agrees() {
        let cfg = SystemConfig::default();
        let pos = place_users(&cfg, 2);
        let ch = generate_channels(&cfg, &pos, 8).unwrap();
        let v = unit_phases(&(0..30).map(|k| 0.37 * k as f64).collect::<Vec<_>>());
        for i in 0..cfg.num_users {
            let direct = ch.effective_channel(&v, i).unwrap();
            let lifted = ch.effective_channel_lifted(&v, i).unwrap();
            let scale = direct.norm().max(1e-300);
            assert!((direct - lifted).norm() <= 1e-12 * scale);
            let zeta = ch.cascade(i);
            assert_eq!(ch.cascade_lifted(i).column(30), ch.hap_wd(i).column(0));
            assert_eq!(zeta.ncols(), 30);
        }
    }

    #[test]
    fn rejects_colocated_user() {
        let cfg = SystemConfig::default();
        assert!(generate_channels(&cfg, &[[0.0, 0.0]], 1).is_err());
    }
}
