//! Seeded parameter sweeps with resumable CSV output.
//!
//! `results.csv` holds one row per (value, scheme, realization) cell and is
//! rewritten in canonical order when a sweep finishes, so its bytes depend
//! only on the configuration, the seed and the set of cells. Wall-clock
//! times go to `timings.csv` for the same reason. `summary.csv` holds the
//! per-(value, scheme) statistics.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use crate::model::rng::mix64;
use crate::model::{dbm_to_watts, realize, Scheme, SystemConfig};
use crate::orchestrator::solve;
use crate::{par, Error, Result};

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TIMINGS_FILE: &str = "timings.csv";
pub const MANIFEST_FILE: &str = "sweep_manifest.txt";

pub const RESULTS_HEADER: [&str; 12] = [
    "param",
    "value",
    "scheme",
    "realization",
    "seed",
    "status",
    "wsr_bits",
    "t_star",
    "outer_iters",
    "converged",
    "rates",
    "error",
];

pub const SUMMARY_HEADER: [&str; 9] = [
    "param",
    "value",
    "scheme",
    "count",
    "failed",
    "mean_wsr_bits",
    "std_wsr_bits",
    "mean_t_star",
    "mean_outer_iters",
];

/// The swept parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SweepParam {
    /// HAP power budget in dBm.
    P0Dbm,
    /// Reflecting elements `N`.
    NIrs,
    /// Distance from the HAP to the user-disk center (m).
    DC,
    /// HAP antennas `M`.
    MAntennas,
    /// Users `K`.
    KUsers,
}

impl SweepParam {
    pub const ALL: [SweepParam; 5] =
        [SweepParam::P0Dbm, SweepParam::NIrs, SweepParam::DC, SweepParam::MAntennas, SweepParam::KUsers];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::P0Dbm => "p0_dbm",
            SweepParam::NIrs => "n_irs",
            SweepParam::DC => "d_c",
            SweepParam::MAntennas => "m_antennas",
            SweepParam::KUsers => "k_users",
        }
    }

    /// Axis label for plots.
    pub fn label(self) -> &'static str {
        match self {
            SweepParam::P0Dbm => "HAP transmit power P0 (dBm)",
            SweepParam::NIrs => "Reflecting elements N",
            SweepParam::DC => "User-disk distance d_c (m)",
            SweepParam::MAntennas => "HAP antennas M",
            SweepParam::KUsers => "Users K",
        }
    }

    /// `base` with the parameter set to `value`.
    pub fn apply(self, base: &SystemConfig, value: f64) -> Result<SystemConfig> {
        if !value.is_finite() {
            return Err(Error::InvalidConfig(format!("{} value {value} is not finite", self.name())));
        }
        let count = || -> Result<usize> {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::InvalidConfig(format!("{} needs a positive integer, got {value}", self.name())))
            }
        };
        let mut c = base.clone();
        match self {
            SweepParam::P0Dbm => c.p0_max = dbm_to_watts(value),
            SweepParam::NIrs => c.num_irs_elements = count()?,
            SweepParam::DC => c.wd_center_distance = value,
            SweepParam::MAntennas => c.num_hap_antennas = count()?,
            SweepParam::KUsers => c = c.with_num_users(count()?)?,
        }
        c.validate()?;
        Ok(c)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        SweepParam::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            let names: Vec<_> = SweepParam::ALL.iter().map(|p| p.name()).collect();
            Error::InvalidConfig(format!("unknown sweep parameter '{s}', expected one of {}", names.join(", ")))
        })
    }
}

/// What to sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub realizations: usize,
    pub schemes: Vec<Scheme>,
    pub base_seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidConfig("a sweep needs at least one value".into()));
        }
        if self.realizations == 0 {
            return Err(Error::InvalidConfig("a sweep needs at least one realization".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::InvalidConfig("a sweep needs at least one scheme".into()));
        }
        for (i, a) in self.values.iter().enumerate() {
            if self.values[..i].contains(a) {
                return Err(Error::InvalidConfig(format!("sweep value {a} is repeated")));
            }
        }
        for (i, s) in self.schemes.iter().enumerate() {
            if self.schemes[..i].contains(s) {
                return Err(Error::InvalidConfig(format!("scheme {s} is repeated")));
            }
        }
        Ok(())
    }

    pub fn num_cells(&self) -> usize {
        self.values.len() * self.schemes.len() * self.realizations
    }
}

/// Channel seed of one realization.
///
/// It depends only on the base seed and the realization index: every sweep
/// value and every scheme sees the same user drop and fading draws, which
/// makes differences along the sweep and between schemes paired comparisons.
pub fn realization_seed(base_seed: u64, realization: usize) -> u64 {
    mix64(mix64(base_seed) ^ realization as u64)
}

/// One cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub param: SweepParam,
    pub value: f64,
    pub scheme: Scheme,
    pub realization: usize,
    pub seed: u64,
    /// `None` when the cell solved; the error message otherwise.
    pub error: Option<String>,
    pub wsr_bits: f64,
    pub t_star: f64,
    pub outer_iters: usize,
    pub converged: bool,
    pub rates: Vec<f64>,
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    fn key(&self) -> (u64, Scheme, usize) {
        (self.value.to_bits(), self.scheme, self.realization)
    }

    fn record(&self) -> Vec<String> {
        let rates: Vec<String> = self.rates.iter().map(|r| r.to_string()).collect();
        vec![
            self.param.name().to_string(),
            self.value.to_string(),
            self.scheme.name().to_string(),
            self.realization.to_string(),
            self.seed.to_string(),
            if self.is_ok() { "ok" } else { "failed" }.to_string(),
            self.wsr_bits.to_string(),
            self.t_star.to_string(),
            self.outer_iters.to_string(),
            self.converged.to_string(),
            rates.join(";"),
            self.error.clone().unwrap_or_default(),
        ]
    }

    fn from_record(rec: &csv::StringRecord) -> std::result::Result<Self, String> {
        if rec.len() != RESULTS_HEADER.len() {
            return Err(format!("expected {} fields, found {}", RESULTS_HEADER.len(), rec.len()));
        }
        let field = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| -> std::result::Result<f64, String> {
            field(i).parse::<f64>().map_err(|_| format!("{} is not a number: '{}'", RESULTS_HEADER[i], field(i)))
        };
        let int = |i: usize| -> std::result::Result<u64, String> {
            field(i).parse::<u64>().map_err(|_| format!("{} is not an integer: '{}'", RESULTS_HEADER[i], field(i)))
        };
        let error = match field(5) {
            "ok" => None,
            "failed" => Some(field(11).to_string()),
            other => return Err(format!("unknown status '{other}'")),
        };
        let rates = if field(10).is_empty() {
            Vec::new()
        } else {
            field(10)
                .split(';')
                .map(|r| r.parse::<f64>().map_err(|_| format!("bad rate '{r}'")))
                .collect::<std::result::Result<_, _>>()?
        };
        Ok(ResultRow {
            param: field(0).parse().map_err(|e: Error| e.to_string())?,
            value: num(1)?,
            scheme: field(2).parse().map_err(|e: Error| e.to_string())?,
            realization: int(3)? as usize,
            seed: int(4)?,
            error,
            wsr_bits: num(6)?,
            t_star: num(7)?,
            outer_iters: int(8)? as usize,
            converged: field(9).parse().map_err(|_| format!("converged is not a boolean: '{}'", field(9)))?,
            rates,
        })
    }
}

/// Statistics of one (value, scheme) pair over its solved realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub param: SweepParam,
    pub value: f64,
    pub scheme: Scheme,
    pub count: usize,
    pub failed: usize,
    pub mean_wsr_bits: f64,
    /// Sample standard deviation; zero for a single realization.
    pub std_wsr_bits: f64,
    pub mean_t_star: f64,
    pub mean_outer_iters: f64,
}

impl SummaryRow {
    fn record(&self) -> Vec<String> {
        vec![
            self.param.name().to_string(),
            self.value.to_string(),
            self.scheme.name().to_string(),
            self.count.to_string(),
            self.failed.to_string(),
            self.mean_wsr_bits.to_string(),
            self.std_wsr_bits.to_string(),
            self.mean_t_star.to_string(),
            self.mean_outer_iters.to_string(),
        ]
    }

    fn from_record(rec: &csv::StringRecord) -> std::result::Result<Self, String> {
        if rec.len() != SUMMARY_HEADER.len() {
            return Err(format!("expected {} fields, found {}", SUMMARY_HEADER.len(), rec.len()));
        }
        let field = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| -> std::result::Result<f64, String> {
            field(i).parse::<f64>().map_err(|_| format!("{} is not a number: '{}'", SUMMARY_HEADER[i], field(i)))
        };
        let int = |i: usize| -> std::result::Result<usize, String> {
            field(i).parse::<usize>().map_err(|_| format!("{} is not an integer: '{}'", SUMMARY_HEADER[i], field(i)))
        };
        Ok(SummaryRow {
            param: field(0).parse().map_err(|e: Error| e.to_string())?,
            value: num(1)?,
            scheme: field(2).parse().map_err(|e: Error| e.to_string())?,
            count: int(3)?,
            failed: int(4)?,
            mean_wsr_bits: num(5)?,
            std_wsr_bits: num(6)?,
            mean_t_star: num(7)?,
            mean_outer_iters: num(8)?,
        })
    }
}

/// Per-(value, scheme) statistics in order of first appearance of each
/// value and in [`Scheme::ALL`] order within a value.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut values: Vec<(SweepParam, f64)> = Vec::new();
    let mut groups: HashMap<(u64, Scheme), Vec<&ResultRow>> = HashMap::new();
    for row in rows {
        if !values.iter().any(|(p, v)| *p == row.param && v.to_bits() == row.value.to_bits()) {
            values.push((row.param, row.value));
        }
        groups.entry((row.value.to_bits(), row.scheme)).or_default().push(row);
    }
    let mut out = Vec::new();
    for (param, value) in values {
        for scheme in Scheme::ALL {
            let Some(group) = groups.get(&(value.to_bits(), scheme)) else { continue };
            let ok: Vec<&&ResultRow> = group.iter().filter(|r| r.is_ok()).collect();
            let n = ok.len();
            let mean = |f: &dyn Fn(&ResultRow) -> f64| {
                if n == 0 {
                    f64::NAN
                } else {
                    ok.iter().map(|r| f(r)).sum::<f64>() / n as f64
                }
            };
            let mean_wsr = mean(&|r| r.wsr_bits);
            let std = if n > 1 {
                (ok.iter().map(|r| (r.wsr_bits - mean_wsr).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else if n == 1 {
                0.0
            } else {
                f64::NAN
            };
            out.push(SummaryRow {
                param,
                value,
                scheme,
                count: n,
                failed: group.len() - n,
                mean_wsr_bits: mean_wsr,
                std_wsr_bits: std,
                mean_t_star: mean(&|r| r.t_star),
                mean_outer_iters: mean(&|r| r.outer_iters as f64),
            });
        }
    }
    out
}

fn csv_error(path: &Path, message: impl Into<String>) -> Error {
    Error::MalformedCsv { path: path.to_path_buf(), message: message.into() }
}

fn read_records<T>(
    path: &Path,
    header: &[&str],
    parse: impl Fn(&csv::StringRecord) -> std::result::Result<T, String>,
) -> Result<Vec<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => csv_error(path, format!("{other:?}")),
        })?;
    let found = reader.headers().map_err(|e| csv_error(path, e.to_string()))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(csv_error(path, format!("header is '{}', expected '{}'", found.iter().collect::<Vec<_>>().join(","), header.join(","))));
    }
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e.to_string()))?;
        out.push(parse(&rec).map_err(|m| csv_error(path, format!("line {}: {m}", i + 2)))?);
    }
    Ok(out)
}

fn write_records(path: &Path, header: &[&str], records: impl Iterator<Item = Vec<String>>) -> Result<()> {
    // write a sibling file and rename it so a crash never leaves half a file
    let tmp = path.with_extension("csv.tmp");
    {
        let mut w = csv::Writer::from_path(&tmp).map_err(|e| csv_error(&tmp, e.to_string()))?;
        w.write_record(header).map_err(|e| csv_error(&tmp, e.to_string()))?;
        for rec in records {
            w.write_record(&rec).map_err(|e| csv_error(&tmp, e.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    read_records(path, &RESULTS_HEADER, ResultRow::from_record)
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    write_records(path, &RESULTS_HEADER, rows.iter().map(ResultRow::record))
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    read_records(path, &SUMMARY_HEADER, SummaryRow::from_record)
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    write_records(path, &SUMMARY_HEADER, rows.iter().map(SummaryRow::record))
}

/// Counts of one sweep invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepOutcome {
    /// Cells solved by this invocation.
    pub computed: usize,
    /// Cells found in an existing `results.csv`.
    pub skipped: usize,
    /// Cells of this invocation that failed.
    pub failed: usize,
    pub results_path: PathBuf,
    pub summary_path: PathBuf,
}

#[derive(Debug, Clone)]
struct Cell {
    value_index: usize,
    scheme: Scheme,
    realization: usize,
}

/// Runs every missing cell of `spec` and refreshes the CSV files in `out_dir`.
pub fn run_sweep(spec: &SweepSpec, config: &SystemConfig, out_dir: &Path, jobs: usize) -> Result<SweepOutcome> {
    run_sweep_with_progress(spec, config, out_dir, jobs, |_, _, _| {})
}

/// [`run_sweep`] reporting each finished row with `(row, done, total)`.
pub fn run_sweep_with_progress(
    spec: &SweepSpec,
    config: &SystemConfig,
    out_dir: &Path,
    jobs: usize,
    mut progress: impl FnMut(&ResultRow, usize, usize),
) -> Result<SweepOutcome> {
    spec.validate()?;
    config.validate()?;
    let configs: Vec<SystemConfig> =
        spec.values.iter().map(|&v| spec.param.apply(config, v)).collect::<Result<_>>()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    check_manifest(out_dir, spec, config)?;

    let results_path = out_dir.join(RESULTS_FILE);
    let summary_path = out_dir.join(SUMMARY_FILE);
    let mut rows = if results_path.exists() { read_results(&results_path)? } else { Vec::new() };
    if let Some(other) = rows.iter().find(|r| r.param != spec.param) {
        return Err(Error::InvalidConfig(format!(
            "{} holds a sweep over {}, not {}",
            results_path.display(),
            other.param,
            spec.param
        )));
    }
    let mut done: BTreeMap<(u64, Scheme, usize), u64> = BTreeMap::new();
    for r in &rows {
        done.insert(r.key(), r.seed);
    }

    let mut cells = Vec::new();
    let mut skipped = 0;
    for (value_index, &value) in spec.values.iter().enumerate() {
        for &scheme in &spec.schemes {
            for realization in 0..spec.realizations {
                let seed = realization_seed(spec.base_seed, realization);
                match done.get(&(value.to_bits(), scheme, realization)) {
                    Some(&s) if s == seed => skipped += 1,
                    Some(&s) => {
                        return Err(Error::InvalidConfig(format!(
                            "{} was produced with another seed ({s} instead of {seed} for realization {realization})",
                            results_path.display()
                        )))
                    }
                    None => cells.push(Cell { value_index, scheme, realization }),
                }
            }
        }
    }

    if !cells.is_empty() {
        let mut appender = Appender::open(out_dir)?;
        let total = cells.len();
        let mut finished = 0;
        let mut write_error: Option<Error> = None;
        let new_rows = par::map_with_sink(
            &cells,
            jobs,
            |cell| run_cell(spec, &configs[cell.value_index], cell),
            |_, (row, millis)| {
                finished += 1;
                if write_error.is_none() {
                    if let Err(e) = appender.append(row, *millis) {
                        write_error = Some(e);
                    }
                }
                progress(row, finished, total);
            },
        );
        if let Some(e) = write_error {
            return Err(e);
        }
        rows.extend(new_rows.into_iter().map(|(row, _)| row));
    }
    let failed = rows.iter().filter(|r| !r.is_ok() && cells.iter().any(|c| same_cell(spec, c, r))).count();

    sort_rows(&mut rows, spec);
    write_results(&results_path, &rows)?;
    write_summary(&summary_path, &summarize(&rows))?;
    Ok(SweepOutcome { computed: cells.len(), skipped, failed, results_path, summary_path })
}

fn same_cell(spec: &SweepSpec, cell: &Cell, row: &ResultRow) -> bool {
    spec.values[cell.value_index].to_bits() == row.value.to_bits()
        && cell.scheme == row.scheme
        && cell.realization == row.realization
}

/// Canonical order: sweep values as listed (unknown values after, by
/// magnitude), then schemes, then realizations.
fn sort_rows(rows: &mut [ResultRow], spec: &SweepSpec) {
    let position = |v: f64| spec.values.iter().position(|x| x.to_bits() == v.to_bits()).unwrap_or(usize::MAX);
    rows.sort_by(|a, b| {
        position(a.value)
            .cmp(&position(b.value))
            .then(a.value.total_cmp(&b.value))
            .then(a.scheme.cmp(&b.scheme))
            .then(a.realization.cmp(&b.realization))
    });
}

fn run_cell(spec: &SweepSpec, config: &SystemConfig, cell: &Cell) -> (ResultRow, f64) {
    let seed = realization_seed(spec.base_seed, cell.realization);
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(|| {
        let channels = realize(config, seed)?;
        solve(&channels, config, cell.scheme, seed)
    }));
    let millis = start.elapsed().as_secs_f64() * 1e3;
    let mut row = ResultRow {
        param: spec.param,
        value: spec.values[cell.value_index],
        scheme: cell.scheme,
        realization: cell.realization,
        seed,
        error: None,
        wsr_bits: f64::NAN,
        t_star: f64::NAN,
        outer_iters: 0,
        converged: false,
        rates: Vec::new(),
    };
    match outcome {
        Ok(Ok(report)) => {
            row.wsr_bits = report.wsr_bits;
            row.t_star = report.t_star;
            row.outer_iters = report.outer_iters;
            row.converged = report.converged;
            row.rates = report.per_user_rates;
        }
        Ok(Err(e)) => row.error = Some(e.to_string()),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            row.error = Some(format!("solver panicked: {msg}"));
        }
    }
    (row, millis)
}

/// Appends finished rows as they arrive so an interrupted sweep can resume.
struct Appender {
    results: csv::Writer<File>,
    timings: csv::Writer<File>,
    results_path: PathBuf,
    timings_path: PathBuf,
}

impl Appender {
    fn open(out_dir: &Path) -> Result<Self> {
        let open = |name: &str, header: &[&str]| -> Result<(csv::Writer<File>, PathBuf)> {
            let path = out_dir.join(name);
            let fresh = fs::metadata(&path).map(|m| m.len() == 0).unwrap_or(true);
            let file = OpenOptions::new().create(true).append(true).open(&path).map_err(|e| Error::io(&path, e))?;
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
            if fresh {
                w.write_record(header).map_err(|e| csv_error(&path, e.to_string()))?;
                w.flush().map_err(|e| Error::io(&path, e))?;
            }
            Ok((w, path))
        };
        let (results, results_path) = open(RESULTS_FILE, &RESULTS_HEADER)?;
        let (timings, timings_path) = open(TIMINGS_FILE, &["value", "scheme", "realization", "wall_time_ms"])?;
        Ok(Self { results, timings, results_path, timings_path })
    }

    fn append(&mut self, row: &ResultRow, millis: f64) -> Result<()> {
        self.results.write_record(row.record()).map_err(|e| csv_error(&self.results_path, e.to_string()))?;
        self.results.flush().map_err(|e| Error::io(&self.results_path, e))?;
        let timing = [row.value.to_string(), row.scheme.name().to_string(), row.realization.to_string(), format!("{millis:.3}")];
        self.timings.write_record(&timing).map_err(|e| csv_error(&self.timings_path, e.to_string()))?;
        self.timings.flush().map_err(|e| Error::io(&self.timings_path, e))
    }
}

/// Records the base configuration, parameter and seed of a sweep directory
/// and refuses to mix cells from a different setup into it.
fn check_manifest(out_dir: &Path, spec: &SweepSpec, config: &SystemConfig) -> Result<()> {
    let path = out_dir.join(MANIFEST_FILE);
    let text = format!("param = {}\nbase_seed = {}\nconfig = {:?}\n", spec.param, spec.base_seed, config);
    match fs::read_to_string(&path) {
        Ok(existing) if existing == text => Ok(()),
        Ok(_) => Err(Error::InvalidConfig(format!(
            "{} belongs to a sweep with a different configuration, parameter or seed; use another output directory",
            out_dir.display()
        ))),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            let mut f = File::create(&path).map_err(|e| Error::io(&path, e))?;
            f.write_all(text.as_bytes()).map_err(|e| Error::io(&path, e))
        }
        Err(e) => Err(Error::io(&path, e)),
    }
}
