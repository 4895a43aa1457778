//! Configuration files: flat TOML with an optional `[solver]` and `[sweep]`
//! table. Every key is optional and defaults to the reference network.
//! Errors carry the line of the offending key.
//!
//! ```toml
//! p0_dbm = 30.0         # HAP power budget
//! eta = 0.8             # harvesting efficiency, in (0, 1)
//! n0_dbm = -90.0        # noise power
//! c0_db = 20.0          # path loss at the reference distance (a loss, in dB)
//! d0 = 1.0              # reference distance (m)
//! k_users = 4
//! m_antennas = 6
//! n_irs = 30
//! d_c = 8.0             # HAP to user-disk center (m)
//! wd_radius = 2.0
//! hap_pos = [0.0, 0.0]
//! irs_pos = [4.0, 3.0]
//! alpha_hap_irs = 2.0
//! alpha_irs_wd = 2.2
//! alpha_hap_wd = 3.5
//! weights = 1.0         # a number for every user, or one entry per user
//! e_initial = 0.0       # J
//! e_battery = 1.0       # J
//! e_circuit = 1e-6      # J, a number or one entry per user
//! tol = 1e-4
//! max_outer_iters = 50
//! max_bcd_iters = 200
//! gr_candidates = 100
//! t_search = "golden"   # or "grid"
//! t_grid_step = 0.01    # used by "grid"
//! phase_init = "ones"   # or "random"
//! seed = 0
//!
//! [solver]              # any field of SolverSettings
//! sdp_tol = 1e-7
//!
//! [sweep]
//! param = "n_irs"       # p0_dbm | n_irs | d_c | m_antennas | k_users
//! values = [10, 20, 30, 40, 50, 60]
//! realizations = 200
//! schemes = ["proposed", "pbo", "abo", "no_irs"]
//! ```

use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use toml::Spanned;

use super::sweep::SweepParam;
use crate::model::{db_to_linear, dbm_to_watts, PhaseInit, Scheme, SolverSettings, SystemConfig, TimeSearch};
use crate::{Error, Result};

/// Grid step used when `t_search = "grid"` and no step is given.
pub const DEFAULT_T_GRID_STEP: f64 = 0.01;

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum PerUser {
    All(f64),
    Each(Vec<f64>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    p0_dbm: Option<Spanned<f64>>,
    eta: Option<Spanned<f64>>,
    n0_dbm: Option<Spanned<f64>>,
    c0_db: Option<Spanned<f64>>,
    d0: Option<Spanned<f64>>,
    k_users: Option<Spanned<usize>>,
    m_antennas: Option<Spanned<usize>>,
    n_irs: Option<Spanned<usize>>,
    d_c: Option<Spanned<f64>>,
    wd_radius: Option<Spanned<f64>>,
    hap_pos: Option<Spanned<[f64; 2]>>,
    irs_pos: Option<Spanned<[f64; 2]>>,
    alpha_hap_irs: Option<Spanned<f64>>,
    alpha_irs_wd: Option<Spanned<f64>>,
    alpha_hap_wd: Option<Spanned<f64>>,
    weights: Option<Spanned<PerUser>>,
    e_initial: Option<Spanned<f64>>,
    e_battery: Option<Spanned<f64>>,
    e_circuit: Option<Spanned<PerUser>>,
    tol: Option<Spanned<f64>>,
    max_outer_iters: Option<Spanned<usize>>,
    max_bcd_iters: Option<Spanned<usize>>,
    gr_candidates: Option<Spanned<usize>>,
    t_search: Option<Spanned<String>>,
    t_grid_step: Option<Spanned<f64>>,
    phase_init: Option<Spanned<String>>,
    seed: Option<Spanned<u64>>,
    solver: Option<Spanned<SolverSettings>>,
    sweep: Option<Spanned<RawSweep>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    param: Option<Spanned<String>>,
    values: Option<Spanned<Vec<f64>>>,
    realizations: Option<Spanned<usize>>,
    schemes: Option<Spanned<Vec<String>>>,
}

/// Sweep settings read from a `[sweep]` table; command-line flags override them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepDefaults {
    pub param: Option<SweepParam>,
    pub values: Option<Vec<f64>>,
    pub realizations: Option<usize>,
    pub schemes: Option<Vec<Scheme>>,
}

/// Everything a configuration file can set.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFile {
    pub system: SystemConfig,
    pub seed: Option<u64>,
    pub sweep: SweepDefaults,
}

/// Reads a configuration file and returns the network it describes.
pub fn load_config(path: &Path) -> Result<SystemConfig> {
    Ok(load_config_file(path)?.system)
}

/// Reads a configuration file including its seed and sweep table.
pub fn load_config_file(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path)
}

/// Parses configuration text; `path` only labels error messages.
pub fn parse_config(text: &str, path: &Path) -> Result<ConfigFile> {
    let ctx = Ctx { text, path };
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map_or(1, |s| ctx.line(s.start));
        ctx.error_at_line(line, e.message().trim().to_string())
    })?;
    ctx.build(raw)
}

struct Ctx<'a> {
    text: &'a str,
    path: &'a Path,
}

impl Ctx<'_> {
    fn line(&self, offset: usize) -> usize {
        self.text[..offset.min(self.text.len())].matches('\n').count() + 1
    }

    fn error_at_line(&self, line: usize, message: String) -> Error {
        Error::ConfigParse { path: PathBuf::from(self.path), line, message }
    }

    fn error(&self, span: Range<usize>, message: String) -> Error {
        self.error_at_line(self.line(span.start), message)
    }

    fn check<T>(&self, v: &Spanned<T>, ok: bool, message: impl FnOnce() -> String) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(self.error(v.span(), message()))
        }
    }

    fn finite(&self, key: &str, v: &Spanned<f64>) -> Result<f64> {
        let x = *v.get_ref();
        self.check(v, x.is_finite(), || format!("{key} must be a finite number, got {x}"))?;
        Ok(x)
    }

    fn positive(&self, key: &str, v: &Spanned<f64>) -> Result<f64> {
        let x = self.finite(key, v)?;
        self.check(v, x > 0.0, || format!("{key} must be positive, got {x}"))?;
        Ok(x)
    }

    fn nonnegative(&self, key: &str, v: &Spanned<f64>) -> Result<f64> {
        let x = self.finite(key, v)?;
        self.check(v, x >= 0.0, || format!("{key} must be nonnegative, got {x}"))?;
        Ok(x)
    }

    fn count(&self, key: &str, v: &Spanned<usize>) -> Result<usize> {
        let x = *v.get_ref();
        self.check(v, x >= 1, || format!("{key} must be at least 1, got {x}"))?;
        Ok(x)
    }

    fn per_user(&self, key: &str, v: &Spanned<PerUser>, k: usize) -> Result<Vec<f64>> {
        let values = match v.get_ref() {
            PerUser::All(x) => vec![*x; k],
            PerUser::Each(list) => {
                let n = list.len();
                self.check(v, n == k, || format!("{key} lists {n} entries for {k} users"))?;
                list.clone()
            }
        };
        self.check(v, values.iter().all(|x| x.is_finite() && *x >= 0.0), || {
            format!("{key} entries must be finite and nonnegative")
        })?;
        Ok(values)
    }

    fn build(&self, raw: RawConfig) -> Result<ConfigFile> {
        let mut c = SystemConfig::default();
        if let Some(v) = &raw.p0_dbm {
            c.p0_max = dbm_to_watts(self.finite("p0_dbm", v)?);
        }
        if let Some(v) = &raw.eta {
            let x = self.finite("eta", v)?;
            self.check(v, x > 0.0 && x < 1.0, || format!("eta must lie in (0, 1), got {x}"))?;
            c.eta = x;
        }
        if let Some(v) = &raw.n0_dbm {
            c.n0 = dbm_to_watts(self.finite("n0_dbm", v)?);
        }
        if let Some(v) = &raw.c0_db {
            c.c0 = db_to_linear(-self.finite("c0_db", v)?);
        }
        if let Some(v) = &raw.d0 {
            c.d0 = self.positive("d0", v)?;
        }
        if let Some(v) = &raw.k_users {
            c = c.with_num_users(self.count("k_users", v)?)?;
        }
        if let Some(v) = &raw.m_antennas {
            c.num_hap_antennas = self.count("m_antennas", v)?;
        }
        if let Some(v) = &raw.n_irs {
            c.num_irs_elements = self.count("n_irs", v)?;
        }
        if let Some(v) = &raw.d_c {
            c.wd_center_distance = self.positive("d_c", v)?;
        }
        if let Some(v) = &raw.wd_radius {
            c.wd_radius = self.nonnegative("wd_radius", v)?;
        }
        for (key, field, target) in [("hap_pos", &raw.hap_pos, &mut c.hap_pos), ("irs_pos", &raw.irs_pos, &mut c.irs_pos)] {
            if let Some(v) = field {
                let p = *v.get_ref();
                self.check(v, p.iter().all(|x| x.is_finite()), || format!("{key} must be finite"))?;
                *target = p;
            }
        }
        if c.hap_pos == c.irs_pos {
            let span = raw.irs_pos.as_ref().or(raw.hap_pos.as_ref()).map_or(0..0, |v| v.span());
            return Err(self.error(span, "hap_pos and irs_pos must differ".into()));
        }
        for (key, field, target) in [
            ("alpha_hap_irs", &raw.alpha_hap_irs, &mut c.alphas.hap_irs),
            ("alpha_irs_wd", &raw.alpha_irs_wd, &mut c.alphas.irs_wd),
            ("alpha_hap_wd", &raw.alpha_hap_wd, &mut c.alphas.hap_wd),
        ] {
            if let Some(v) = field {
                *target = self.nonnegative(key, v)?;
            }
        }
        let k = c.num_users;
        if let Some(v) = &raw.weights {
            c.weights = self.per_user("weights", v, k)?;
        }
        if let Some(v) = &raw.e_circuit {
            c.e_circuit = self.per_user("e_circuit", v, k)?;
        }
        if let Some(v) = &raw.e_initial {
            c.e_initial = self.nonnegative("e_initial", v)?;
        }
        if let Some(v) = &raw.e_battery {
            c.e_battery = self.nonnegative("e_battery", v)?;
        }
        if c.e_battery < c.e_initial {
            let span = raw.e_battery.as_ref().or(raw.e_initial.as_ref()).map_or(0..0, |v| v.span());
            return Err(self.error(
                span,
                format!("e_battery ({}) must be at least e_initial ({})", c.e_battery, c.e_initial),
            ));
        }
        if let Some(v) = &raw.tol {
            c.tol = self.positive("tol", v)?;
        }
        if let Some(v) = &raw.max_outer_iters {
            c.max_outer_iters = self.count("max_outer_iters", v)?;
        }
        if let Some(v) = &raw.max_bcd_iters {
            c.max_bcd_iters = self.count("max_bcd_iters", v)?;
        }
        if let Some(v) = &raw.gr_candidates {
            c.gr_candidates = self.count("gr_candidates", v)?;
        }
        let step = match &raw.t_grid_step {
            Some(v) => {
                let s = self.positive("t_grid_step", v)?;
                self.check(v, s < 0.5, || format!("t_grid_step must lie in (0, 0.5), got {s}"))?;
                s
            }
            None => DEFAULT_T_GRID_STEP,
        };
        if let Some(v) = &raw.t_search {
            c.t_search = match v.get_ref().as_str() {
                "golden" => TimeSearch::Golden,
                "grid" => TimeSearch::Grid { step },
                other => return Err(self.error(v.span(), format!("t_search must be \"golden\" or \"grid\", got \"{other}\""))),
            };
        }
        if let Some(v) = &raw.phase_init {
            c.phase_init = match v.get_ref().as_str() {
                "ones" => PhaseInit::Ones,
                "random" => PhaseInit::Random,
                other => return Err(self.error(v.span(), format!("phase_init must be \"ones\" or \"random\", got \"{other}\""))),
            };
        }
        if let Some(v) = &raw.solver {
            c.solver = *v.get_ref();
            if let Err(e) = c.validate() {
                return Err(self.error(v.span(), e.to_string()));
            }
        }
        // anything left is a cross-field inconsistency; report it at line 1
        c.validate().map_err(|e| self.error_at_line(1, e.to_string()))?;

        let sweep = match &raw.sweep {
            Some(s) => self.sweep(s.get_ref())?,
            None => SweepDefaults::default(),
        };
        Ok(ConfigFile { system: c, seed: raw.seed.map(|s| s.into_inner()), sweep })
    }

    fn sweep(&self, raw: &RawSweep) -> Result<SweepDefaults> {
        let mut out = SweepDefaults::default();
        if let Some(v) = &raw.param {
            out.param = Some(v.get_ref().parse().map_err(|e: Error| self.error(v.span(), e.to_string()))?);
        }
        if let Some(v) = &raw.values {
            self.check(v, !v.get_ref().is_empty(), || "sweep values must not be empty".into())?;
            self.check(v, v.get_ref().iter().all(|x| x.is_finite()), || "sweep values must be finite".into())?;
            out.values = Some(v.get_ref().clone());
        }
        if let Some(v) = &raw.realizations {
            out.realizations = Some(self.count("realizations", v)?);
        }
        if let Some(v) = &raw.schemes {
            let schemes = v
                .get_ref()
                .iter()
                .map(|s| s.parse::<Scheme>())
                .collect::<Result<Vec<_>>>()
                .map_err(|e| self.error(v.span(), e.to_string()))?;
            self.check(v, !schemes.is_empty(), || "sweep schemes must not be empty".into())?;
            out.schemes = Some(schemes);
        }
        Ok(out)
    }
}
