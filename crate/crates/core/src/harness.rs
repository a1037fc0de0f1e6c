//! Experiment driver behind the `chimps` binary.
//!
//! An [`ExperimentConfig`] (parsed from TOML or assembled from command-line
//! flags) is executed by [`run`], which returns [`Artifacts`]: the generated
//! circuit and a set of named tables. Every table is plain tab-separated
//! text behind a `# chimps-table v1 <kind>` header, and [`Table::parse`]
//! rejects any other version.
//!
//! Parallel work (χ values, seeds, ensemble trials) is collected in input
//! order and reduced sequentially, so results do not depend on the thread
//! count. `deterministic` pins the pool to one thread regardless.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{brick_1d, grid_2d, named_gate, Circuit, GateSet, Grid, LayerKind};
use crate::error::{Error, Result};
use crate::grouped::{GroupedMpsState, Grouping};
use crate::gte::{collapse_from_curves, gte_trials, summarize, SpectrumCurve};
use crate::metrics::{
    cross_entropy, d_star, exact_fidelity, fidelity_from_xeb, log_linear_slope, porter_thomas_distance, xeb,
    xeb_sampled, DepthMetrics, DistributionSource, MetricsReport, D_STAR_TOLERANCE, EXACT_SUM_MAX_QUBITS,
    REPORT_COLUMNS,
};
use crate::mps::{EntryKind, FidelityLog, MpsState};
use crate::statevector::{StateVector, MAX_QUBITS};

/// Schema version written into every table header.
pub const TABLE_VERSION: u32 = 1;
const TABLE_MAGIC: &str = "# chimps-table v";

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "CHIMPS_THREADS";

/// Grids larger than this need `extended`.
pub const EXTENDED_QUBITS: usize = 30;

/// Mean fidelity below which noisy-run points are left out of decay fits.
pub const DECAY_FIT_FLOOR: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    #[serde(rename = "run-1d")]
    Run1d,
    #[serde(rename = "run-2d")]
    Run2d,
    RunGte,
    CompareExact,
    Sample,
    PtTest,
    XebNoise,
    Sweep,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Run1d => "run-1d",
            Self::Run2d => "run-2d",
            Self::RunGte => "run-gte",
            Self::CompareExact => "compare-exact",
            Self::Sample => "sample",
            Self::PtTest => "pt-test",
            Self::XebNoise => "xeb-noise",
            Self::Sweep => "sweep",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_qubits: Option<usize>,
    /// Grid spec for 2D runs, e.g. `sycamore54`, `5x4` or `5,4,5`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(default)]
    pub chi: Vec<usize>,
    #[serde(default = "default_gate")]
    pub gate: String,
    /// Grouping tags; more than one enables scheduled regrouping.
    #[serde(default)]
    pub grouping: Vec<String>,
    /// Ensemble trials (run-gte).
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_beta")]
    pub beta: usize,
    /// Circuit seeds per point: `seed, seed + 1, ...`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<usize>,
    /// Per-gate fidelities for xeb-noise.
    #[serde(default)]
    pub noise: Vec<f64>,
    /// Bitstrings drawn by `sample`.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub extended: bool,
    #[serde(default)]
    pub deterministic: bool,
}

fn default_gate() -> String {
    "CZ".into()
}

fn default_trials() -> usize {
    100
}

fn default_beta() -> usize {
    1
}

fn default_samples() -> usize {
    1000
}

impl ExperimentConfig {
    /// Config with defaults for everything but the kind and seed.
    pub fn new(kind: ExperimentKind, seed: u64) -> Self {
        Self {
            kind,
            seed,
            n_qubits: None,
            grid: None,
            depth: None,
            chi: Vec::new(),
            gate: default_gate(),
            grouping: Vec::new(),
            trials: default_trials(),
            beta: default_beta(),
            seeds: None,
            noise: Vec::new(),
            samples: default_samples(),
            out: None,
            extended: false,
            deterministic: false,
        }
    }

    /// Parses TOML; errors carry the line of the offending key or value.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let line = match e.span() {
                // document-level errors (unknown or duplicate keys) point at the key itself
                Some(span) if span.start == 0 => key_line(text, &msg),
                Some(span) => Some(text[..span.start].matches('\n').count() + 1),
                None => None,
            };
            match line {
                Some(line) => Error::Parse { line, msg },
                None => Error::Config(msg),
            }
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    fn need_n(&self) -> Result<usize> {
        let n = self.n_qubits.ok_or_else(|| Error::Config(format!("{} needs n_qubits", self.kind.name())))?;
        if n < 2 {
            return Err(Error::Config(format!("n_qubits must be at least 2, got {n}")));
        }
        Ok(n)
    }

    fn need_depth(&self) -> Result<usize> {
        self.depth.ok_or_else(|| Error::Config(format!("{} needs depth", self.kind.name())))
    }

    fn need_chi(&self) -> Result<&[usize]> {
        if self.chi.is_empty() {
            return Err(Error::Config(format!("{} needs a non-empty chi list", self.kind.name())));
        }
        if self.chi.contains(&0) {
            return Err(Error::Config("chi values must be positive".into()));
        }
        Ok(&self.chi)
    }

    fn grid(&self) -> Result<Grid> {
        Grid::parse(self.grid.as_deref().unwrap_or("sycamore54"))
    }

    fn groupings(&self, grid: &Grid) -> Result<Vec<Grouping>> {
        if self.grouping.is_empty() {
            return Ok(vec![Grouping::from_columns(vec![1; grid.n_columns()], grid)?]);
        }
        self.grouping.iter().map(|t| Grouping::parse(t, grid)).collect()
    }

    fn seed_list(&self, default: usize) -> Vec<u64> {
        (0..self.seeds.unwrap_or(default) as u64).map(|k| self.seed.wrapping_add(k)).collect()
    }

    fn noise_levels(&self) -> Vec<f64> {
        if self.noise.is_empty() {
            vec![0.995, 0.99, 0.98]
        } else {
            self.noise.clone()
        }
    }

    /// Checks that every field the kind needs is present and every tag
    /// resolves.
    pub fn validate(&self) -> Result<()> {
        named_gate(&self.gate)?;
        if self.seeds == Some(0) {
            return Err(Error::Config("seeds must be positive".into()));
        }
        match self.kind {
            ExperimentKind::Run1d | ExperimentKind::CompareExact | ExperimentKind::Sample => {
                self.need_n()?;
                self.need_depth()?;
                self.need_chi()?;
                if self.kind == ExperimentKind::Sample && self.samples == 0 {
                    return Err(Error::Config("samples must be positive".into()));
                }
                if self.kind == ExperimentKind::CompareExact && self.n_qubits > Some(MAX_QUBITS) {
                    return Err(Error::Capacity { n: self.n_qubits.unwrap(), max: MAX_QUBITS });
                }
            }
            ExperimentKind::PtTest | ExperimentKind::XebNoise => {
                let n = self.need_n()?;
                self.need_depth()?;
                if n > MAX_QUBITS {
                    return Err(Error::Capacity { n, max: MAX_QUBITS });
                }
                if self.noise_levels().iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
                    return Err(Error::Config(format!("noise levels {:?} outside (0, 1]", self.noise)));
                }
            }
            ExperimentKind::Run2d => {
                self.need_depth()?;
                self.need_chi()?;
                self.check_grid()?;
            }
            ExperimentKind::RunGte => {
                self.need_chi()?;
                if !(1..=2).contains(&self.beta) {
                    return Err(Error::Config(format!("beta must be 1 or 2, got {}", self.beta)));
                }
                if self.trials == 0 {
                    return Err(Error::Config("trials must be positive".into()));
                }
            }
            ExperimentKind::Sweep => {
                self.need_chi()?;
                self.need_depth()?;
                if self.grid.is_some() {
                    self.check_grid()?;
                } else {
                    self.need_n()?;
                }
            }
        }
        Ok(())
    }

    fn check_grid(&self) -> Result<()> {
        let grid = self.grid()?;
        self.groupings(&grid)?;
        if grid.n_qubits() > EXTENDED_QUBITS && !self.extended {
            return Err(Error::Config(format!(
                "a {}-qubit grid is a long run; pass extended to enable it",
                grid.n_qubits()
            )));
        }
        if self.extended && self.out.is_none() {
            return Err(Error::Config("extended runs checkpoint to disk and need an output directory".into()));
        }
        Ok(())
    }
}

/// Line of the first `key = ...` assignment for the first backquoted name
/// in `msg`.
fn key_line(text: &str, msg: &str) -> Option<usize> {
    let key = msg.split('`').nth(1)?;
    text.lines()
        .position(|l| l.split('=').next().is_some_and(|k| k.trim() == key))
        .map(|i| i + 1)
}

/// A versioned tab-separated table.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub kind: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(kind: &str, columns: &[&str]) -> Self {
        Self { kind: kind.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.kind);
        self.rows.push(row);
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{TABLE_MAGIC}{TABLE_VERSION} {}\n{}\n", self.kind, self.columns.join("\t"));
        for r in &self.rows {
            writeln!(s, "{}", r.join("\t")).unwrap();
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("");
        let rest = header
            .strip_prefix(TABLE_MAGIC)
            .ok_or_else(|| Error::Parse { line: 1, msg: "missing table header".into() })?;
        let (version, kind) = rest.split_once(' ').unwrap_or((rest, ""));
        match version.parse::<u32>() {
            Ok(TABLE_VERSION) => {}
            _ => return Err(Error::Parse { line: 1, msg: format!("unsupported table version {version:?}") }),
        }
        let columns: Vec<String> = lines
            .next()
            .ok_or_else(|| Error::Parse { line: 2, msg: "missing column names".into() })?
            .split('\t')
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let row: Vec<String> = line.split('\t').map(str::to_string).collect();
            if row.len() != columns.len() {
                return Err(Error::Parse {
                    line: i + 3,
                    msg: format!("{} fields, expected {}", row.len(), columns.len()),
                });
            }
            rows.push(row);
        }
        Ok(Self { kind: kind.trim().to_string(), columns, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric cell, `None` for missing columns or `-`.
    pub fn f64_at(&self, row: usize, name: &str) -> Option<f64> {
        self.rows.get(row)?.get(self.column(name)?)?.parse().ok()
    }

    pub fn f64_column(&self, name: &str) -> Vec<Option<f64>> {
        (0..self.rows.len()).map(|r| self.f64_at(r, name)).collect()
    }
}

/// Table cell text. Floats use the shortest round-trip form, switching to
/// exponent notation for very small or large magnitudes.
trait Cell {
    fn text(&self) -> String;
}

impl Cell for f64 {
    fn text(&self) -> String {
        let a = self.abs();
        if a != 0.0 && a.is_finite() && !(1e-4..1e7).contains(&a) {
            format!("{self:e}")
        } else {
            self.to_string()
        }
    }
}

macro_rules! display_cell {
    ($($t:ty),*) => {$(
        impl Cell for $t {
            fn text(&self) -> String {
                self.to_string()
            }
        }
    )*};
}
display_cell!(usize, u64, &str, String);

impl<T: Cell> Cell for &T {
    fn text(&self) -> String {
        (*self).text()
    }
}

fn cell(v: impl Cell) -> String {
    v.text()
}

fn opt(v: Option<impl Cell>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.text())
}

/// Metrics report as a table with [`REPORT_COLUMNS`].
pub fn metrics_table(report: &MetricsReport) -> Table {
    let mut t = Table::new("metrics", &REPORT_COLUMNS);
    for r in &report.rows {
        t.push(vec![
            cell(r.depth),
            opt(r.gate_ordinal),
            opt(r.site),
            opt(r.f_n),
            cell(r.cum_f),
            cell(r.f_av),
            opt(r.b),
            opt(r.c),
            cell(r.bound),
            opt(r.f_exact),
        ]);
    }
    t
}

/// One row per log entry.
pub fn fidelity_table(log: &FidelityLog) -> Table {
    let mut t = Table::new("fidelity-log", &["ordinal", "depth", "kind", "site", "qubit_a", "qubit_b", "f"]);
    for e in log.entries() {
        let kind = match e.kind {
            EntryKind::Gate => "gate",
            EntryKind::Regroup => "regroup",
        };
        t.push(vec![cell(e.ordinal), cell(e.depth), cell(kind), cell(e.site), cell(e.qubits.0), cell(e.qubits.1), cell(e.f)]);
    }
    t
}

/// Output of one experiment.
#[derive(Clone, Debug, Default)]
pub struct Artifacts {
    pub circuit: Option<Circuit>,
    /// `(name, table)`; each is written to `<name>.tsv`.
    pub tables: Vec<(String, Table)>,
}

impl Artifacts {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    fn add(&mut self, name: impl Into<String>, table: Table) {
        self.tables.push((name.into(), table));
    }

    /// Writes `circuit.txt`, every table and a copy of the config into `dir`.
    pub fn write(&self, dir: &Path, config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut put = |name: &str, text: String| -> Result<()> {
            let path = dir.join(name);
            fs::write(&path, text)?;
            written.push(path);
            Ok(())
        };
        put("config.toml", config.to_toml())?;
        if let Some(c) = &self.circuit {
            put("circuit.txt", c.to_text())?;
        }
        for (name, t) in &self.tables {
            put(&format!("{name}.tsv"), t.to_text())?;
        }
        Ok(written)
    }
}

/// Worker threads: one when `deterministic`, else `CHIMPS_THREADS`, else
/// rayon's default (0).
pub fn thread_count(deterministic: bool) -> Result<usize> {
    if deterministic {
        return Ok(1);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_ENV}={v:?} is not a thread count"))),
        Err(_) => Ok(0),
    }
}

/// Validates and executes `config` inside a dedicated thread pool.
pub fn run(config: &ExperimentConfig) -> Result<Artifacts> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count(config.deterministic)?)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| match config.kind {
        ExperimentKind::Run1d => run_1d(config),
        ExperimentKind::Run2d => run_2d(config),
        ExperimentKind::RunGte => run_gte(config),
        ExperimentKind::CompareExact => compare_exact(config),
        ExperimentKind::Sample => sample(config),
        ExperimentKind::PtTest => pt_test(config),
        ExperimentKind::XebNoise => xeb_noise_run(config),
        ExperimentKind::Sweep => sweep(config),
    })
}

fn suffixed(base: &str, chi: usize, many: bool) -> String {
    if many {
        format!("{base}_chi{chi}")
    } else {
        base.to_string()
    }
}

/// State-vector replay of a circuit that can be advanced depth by depth.
pub struct OracleCursor<'a> {
    circuit: &'a Circuit,
    state: StateVector,
    next_layer: usize,
    depth: usize,
}

impl<'a> OracleCursor<'a> {
    pub fn new(circuit: &'a Circuit) -> Result<Self> {
        Ok(Self { circuit, state: StateVector::zero(circuit.n_qubits)?, next_layer: 0, depth: 0 })
    }

    /// Applies layers up to and including the `depth`-th two-qubit layer.
    pub fn advance_to(&mut self, depth: usize) -> Result<&StateVector> {
        while self.depth < depth && self.next_layer < self.circuit.layers.len() {
            let layer = &self.circuit.layers[self.next_layer];
            for g in &layer.gates {
                self.state.apply(g)?;
            }
            if layer.kind == LayerKind::TwoQubit {
                self.depth += 1;
            }
            self.next_layer += 1;
        }
        Ok(&self.state)
    }
}

/// F, B and C of `state` against the oracle.
pub fn depth_metrics<S: DistributionSource>(state: &S, oracle: &StateVector) -> Result<DepthMetrics> {
    Ok(DepthMetrics {
        f_exact: Some(exact_fidelity(state, oracle)?),
        b: Some(xeb(state, oracle)?),
        c: Some(cross_entropy(state, oracle)?.value),
    })
}

/// Truncated 1D run; with `oracle`, exact metrics are recorded per depth.
pub fn traced_mps_run(circuit: &Circuit, chi: usize, oracle: bool) -> Result<(MpsState, Vec<DepthMetrics>)> {
    let mut mps = MpsState::zero(circuit.n_qubits, chi)?;
    let mut per_depth = vec![DepthMetrics::default()];
    let mut cursor = if oracle { Some(OracleCursor::new(circuit)?) } else { None };
    mps.run_circuit_with(circuit, |d, m| {
        if let Some(c) = cursor.as_mut() {
            per_depth.push(depth_metrics(&*m, c.advance_to(d)?)?);
        }
        Ok(())
    })?;
    Ok((mps, per_depth))
}

fn wants_oracle(n: usize) -> bool {
    n <= EXACT_SUM_MAX_QUBITS
}

/// Geometric mean fidelity over the second half of the run.
fn stationary_f(log: &FidelityLog, depth: usize) -> Option<f64> {
    log.geometric_mean_where(|e| 2 * e.depth > depth)
}

fn run_1d(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let (n, depth, chis) = (cfg.need_n()?, cfg.need_depth()?, cfg.need_chi()?);
    let circuit = brick_1d(n, depth, cfg.seed, &cfg.gate)?;
    let runs: Vec<_> = chis.par_iter().map(|&chi| traced_mps_run(&circuit, chi, wants_oracle(n))).collect();
    let mut out = Artifacts::default();
    let mut summary = Table::new(
        "run-1d",
        &["chi", "two_qubit_gates", "entries", "F_est", "f_av", "f_window", "f_stationary", "bound", "F_exact"],
    );
    let many = chis.len() > 1;
    for (&chi, run) in chis.iter().zip(runs) {
        let (mps, per_depth) = run?;
        let log = mps.log();
        summary.push(vec![
            cell(chi),
            cell(log.two_qubit_gates()),
            cell(log.len()),
            cell(log.estimated_fidelity()),
            cell(log.f_av()),
            opt(log.windowed_f_av(depth)),
            opt(stationary_f(log, depth)),
            cell(log.overlap_lower_bound()),
            opt(per_depth.last().and_then(|m| m.f_exact)),
        ]);
        out.add(suffixed("fidelity", chi, many), fidelity_table(log));
        out.add(suffixed("metrics", chi, many), metrics_table(&MetricsReport::from_log(log, &per_depth)));
    }
    out.add("summary", summary);
    out.circuit = Some(circuit);
    Ok(out)
}

/// 64-bit FNV-1a, used to tie checkpoints to the circuit they came from.
fn fingerprint(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

/// Grouped run of `circuit`; with `checkpoint`, the state is saved after
/// every cycle and a matching checkpoint found on entry is resumed.
pub fn grouped_run(
    circuit: &Circuit,
    groupings: &[Grouping],
    chi: usize,
    oracle: bool,
    checkpoint: Option<&Path>,
) -> Result<(GroupedMpsState, Vec<DepthMetrics>)> {
    let tags: Vec<&str> = groupings.iter().map(Grouping::tag).collect();
    let label = format!("circuit={:016x} chi={chi} groupings={}", fingerprint(&circuit.to_text()), tags.join(" "));
    let mut state = GroupedMpsState::zero(&groupings[0], chi)?;
    if let Some(path) = checkpoint.filter(|p| p.exists()) {
        let (saved, saved_label) = GroupedMpsState::load_checkpoint(path)?;
        if saved_label != label {
            return Err(Error::Config(format!(
                "checkpoint {} belongs to a different run ({saved_label})",
                path.display()
            )));
        }
        state = saved;
    }
    let mut per_depth = vec![DepthMetrics::default()];
    let mut cursor = if oracle { Some(OracleCursor::new(circuit)?) } else { None };
    if let Some(c) = cursor.as_mut() {
        // metrics of skipped cycles are not recovered on resume
        for d in 1..=state.depth() {
            c.advance_to(d)?;
            per_depth.push(DepthMetrics::default());
        }
    }
    let remaining = circuit.after_depth(state.depth());
    state.run_scheduled(&remaining, groupings, |d, s| {
        if let Some(c) = cursor.as_mut() {
            per_depth.push(depth_metrics(&*s, c.advance_to(d)?)?);
        }
        if let Some(path) = checkpoint {
            s.save_checkpoint(path, &label)?;
        }
        Ok(())
    })?;
    Ok((state, per_depth))
}

fn run_2d(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let (depth, chis) = (cfg.need_depth()?, cfg.need_chi()?);
    let grid = cfg.grid()?;
    let groupings = cfg.groupings(&grid)?;
    let circuit = grid_2d(&grid, depth, cfg.seed, &GateSet::for_two_qubit(&cfg.gate)?)?;
    let oracle = wants_oracle(grid.n_qubits()) && !cfg.extended;
    let many = chis.len() > 1;
    let checkpoint = |chi: usize| cfg.out.as_ref().filter(|_| cfg.extended).map(|d| d.join(format!("checkpoint_chi{chi}.bin")));
    if let Some(dir) = cfg.out.as_ref().filter(|_| cfg.extended) {
        fs::create_dir_all(dir)?;
    }
    let runs: Vec<_> = if cfg.extended {
        // one long run at a time keeps peak memory at a single state
        chis.iter().map(|&chi| grouped_run(&circuit, &groupings, chi, oracle, checkpoint(chi).as_deref())).collect()
    } else {
        chis.par_iter().map(|&chi| grouped_run(&circuit, &groupings, chi, oracle, None)).collect()
    };
    let mut out = Artifacts::default();
    let mut summary = Table::new(
        "run-2d",
        &["chi", "groupings", "two_qubit_gates", "exact_gates", "cross_gates", "regroups", "F_est", "f_av", "eps_av", "stored_values", "F_exact"],
    );
    let tags: Vec<&str> = groupings.iter().map(Grouping::tag).collect();
    for (&chi, run) in chis.iter().zip(runs) {
        let (state, per_depth) = run?;
        let log = state.log();
        let regroups = log.entries().iter().filter(|e| e.kind == EntryKind::Regroup).count();
        summary.push(vec![
            cell(chi),
            tags.join(" "),
            cell(log.two_qubit_gates()),
            cell(log.exact_gates()),
            cell(log.len() - regroups),
            cell(regroups),
            cell(log.estimated_fidelity()),
            cell(log.f_av()),
            cell(1.0 - log.f_av()),
            cell(state.stored_values()),
            opt(per_depth.last().and_then(|m| m.f_exact)),
        ]);
        out.add(suffixed("fidelity", chi, many), fidelity_table(log));
        out.add(suffixed("metrics", chi, many), metrics_table(&MetricsReport::from_log(log, &per_depth)));
    }
    out.add("summary", summary);
    out.circuit = Some(circuit);
    Ok(out)
}

fn run_gte(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let gate = named_gate(&cfg.gate)?;
    let mut estimates = Table::new("gte", &["gate", "beta", "chi", "trials", "f_gte", "stderr"]);
    let mut spectra = Table::new("gte-spectra", &["chi", "mu", "x", "chi_s2"]);
    let mut curves = Vec::new();
    for &chi in cfg.need_chi()? {
        let samples = gte_trials(&gate, chi, cfg.beta, cfg.trials, cfg.seed)?;
        let est = summarize(&samples);
        estimates.push(vec![cfg.gate.clone(), cell(cfg.beta), cell(chi), cell(est.trials), cell(est.mean), cell(est.stderr)]);
        let values: Vec<Vec<f64>> = samples.into_iter().map(|s| s.singular_values).collect();
        let curve = SpectrumCurve::from_spectra(&values, chi);
        for (mu, (x, y)) in curve.x.iter().zip(&curve.y).enumerate() {
            spectra.push(vec![cell(chi), cell(mu + 1), cell(x), cell(y)]);
        }
        curves.push(curve);
    }
    let mut out = Artifacts::default();
    if curves.len() > 1 {
        let report = collapse_from_curves(&cfg.gate, cfg.beta, curves);
        let mut t = Table::new("gte-collapse", &["gate", "beta", "chis", "max_relative_deviation"]);
        let chis: Vec<String> = cfg.chi.iter().map(|c| c.to_string()).collect();
        t.push(vec![cfg.gate.clone(), cell(cfg.beta), chis.join(","), cell(report.max_relative_deviation)]);
        out.add("collapse", t);
    }
    out.add("summary", estimates);
    out.add("spectra", spectra);
    Ok(out)
}

fn compare_exact(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let (n, depth, chis) = (cfg.need_n()?, cfg.need_depth()?, cfg.need_chi()?);
    let circuit = brick_1d(n, depth, cfg.seed, &cfg.gate)?;
    let mut oracle = StateVector::zero(n)?;
    oracle.run_circuit(&circuit)?;
    let mut summary = Table::new(
        "compare-exact",
        &["chi", "max_amplitude_deviation", "min_f_n", "entries", "F_est", "F_exact"],
    );
    let mut out = Artifacts::default();
    let many = chis.len() > 1;
    let runs: Vec<_> = chis.par_iter().map(|&chi| traced_mps_run(&circuit, chi, wants_oracle(n))).collect();
    for (&chi, run) in chis.iter().zip(runs) {
        let (mps, per_depth) = run?;
        let dense = mps.to_statevector()?;
        let dev = dense.amplitudes().iter().zip(oracle.amplitudes()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let log = mps.log();
        let min_f = log.entries().iter().map(|e| e.f).fold(1.0, f64::min);
        summary.push(vec![
            cell(chi),
            cell(dev),
            cell(min_f),
            cell(log.len()),
            cell(log.estimated_fidelity()),
            cell(exact_fidelity(&mps, &oracle)?),
        ]);
        out.add(suffixed("fidelity", chi, many), fidelity_table(log));
        out.add(suffixed("metrics", chi, many), metrics_table(&MetricsReport::from_log(log, &per_depth)));
    }
    out.add("summary", summary);
    out.circuit = Some(circuit);
    Ok(out)
}

fn sample(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let (n, depth, chis) = (cfg.need_n()?, cfg.need_depth()?, cfg.need_chi()?);
    let circuit = brick_1d(n, depth, cfg.seed, &cfg.gate)?;
    let oracle = if wants_oracle(n) {
        let mut s = StateVector::zero(n)?;
        s.run_circuit(&circuit)?;
        Some(s)
    } else {
        None
    };
    let mut samples = Table::new("samples", &["chi", "index", "bits", "p_mps"]);
    let mut summary = Table::new("sample", &["chi", "samples", "F_est", "B_sampled", "stderr", "B_exact"]);
    for &chi in chis {
        let mut mps = MpsState::zero(n, chi)?;
        mps.run_circuit(&circuit)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(chi as u64);
        for i in 0..cfg.samples {
            let bits = mps.sample(&mut rng);
            let p = mps.amplitude(&bits)?.norm_sqr();
            samples.push(vec![cell(chi), cell(i), crate::format_bits(&bits), cell(p)]);
        }
        let (est, exact) = match &oracle {
            Some(o) => {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(chi as u64);
                (Some(xeb_sampled(&mut mps, o, cfg.samples, &mut rng)?), Some(xeb(&mps, o)?))
            }
            None => (None, None),
        };
        summary.push(vec![
            cell(chi),
            cell(cfg.samples),
            cell(mps.log().estimated_fidelity()),
            opt(est.map(|e| e.mean)),
            opt(est.map(|e| e.stderr)),
            opt(exact),
        ]);
    }
    let mut out = Artifacts::default();
    out.add("summary", summary);
    out.add("samples", samples);
    out.circuit = Some(circuit);
    Ok(out)
}

fn pt_test(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let (n, depth) = (cfg.need_n()?, cfg.need_depth()?);
    let circuit = brick_1d(n, depth, cfg.seed, &cfg.gate)?;
    let mut t = Table::new("porter-thomas", &["depth", "ks_distance", "B"]);
    let mut push = |d: usize, s: &StateVector| -> Result<()> {
        t.push(vec![cell(d), cell(porter_thomas_distance(&s.probabilities(), n)), cell(xeb(s, s)?)]);
        Ok(())
    };
    StateVector::zero(n)?.run_circuit_with(&circuit, |d, s| push(d, s))?;
    let mut out = Artifacts::default();
    out.add("summary", t);
    out.circuit = Some(circuit);
    Ok(out)
}

/// Seed-averaged F and B of a noisy circuit against its noiseless version.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseCurve {
    pub f_gate: f64,
    /// Mean fidelity per depth, index 0 being the initial state.
    pub fidelity: Vec<f64>,
    pub xeb: Vec<f64>,
}

/// Exponential fit of `F` and `B` against the two-qubit gate count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub f_gate: f64,
    /// Inclusive depth window of the fit.
    pub window: (usize, usize),
    pub rate_f: f64,
    pub rate_b: f64,
}

impl DecayFit {
    /// `|rate_B - rate_F| / rate_F`.
    pub fn relative_gap(&self) -> f64 {
        (self.rate_b - self.rate_f).abs() / self.rate_f
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct XebNoiseReport {
    pub n_qubits: usize,
    pub seeds: usize,
    /// Mean cumulative two-qubit gate count per depth.
    pub gates: Vec<f64>,
    /// Seed-averaged XEB of the noiseless circuit with itself.
    pub ideal_xeb: Vec<f64>,
    /// First depth where `ideal_xeb` has come down to `1 + D_STAR_TOLERANCE`.
    pub d_star: Option<usize>,
    pub curves: Vec<NoiseCurve>,
    /// One fit per curve; `None` when fewer than three depths lie between
    /// `d_star` and the point where `F` drops below [`DECAY_FIT_FLOOR`].
    pub fits: Vec<Option<DecayFit>>,
}

/// Noisy-gate experiment on 1D circuits with seeds `seed, seed + 1, ...`.
/// Circuit `k` gets noise seed `seed + k + 2^32` so noise and circuit draws
/// never share a stream.
pub fn xeb_noise(n: usize, depth: usize, gate: &str, f_gates: &[f64], seeds: &[u64]) -> Result<XebNoiseReport> {
    struct SeedRun {
        gates: Vec<f64>,
        ideal_xeb: Vec<f64>,
        fidelity: Vec<Vec<f64>>,
        xeb: Vec<Vec<f64>>,
    }
    let runs: Vec<Result<SeedRun>> = seeds
        .par_iter()
        .map(|&seed| {
            let circuit = brick_1d(n, depth, seed, gate)?;
            let mut ideal = Vec::with_capacity(depth + 1);
            StateVector::zero(n)?.run_circuit_with(&circuit, |_, s| {
                ideal.push(s.clone());
                Ok(())
            })?;
            let ideal_xeb = ideal.iter().map(|s| xeb(s, s)).collect::<Result<Vec<_>>>()?;
            let mut gates = vec![0.0];
            for l in circuit.layers.iter().filter(|l| l.kind == LayerKind::TwoQubit) {
                gates.push(gates.last().unwrap() + l.gates.len() as f64);
            }
            let mut fidelity = Vec::new();
            let mut xebs = Vec::new();
            for &f in f_gates {
                let noisy = circuit.with_noise(f, seed.wrapping_add(1 << 32))?;
                let (mut fs, mut bs) = (Vec::with_capacity(depth + 1), Vec::with_capacity(depth + 1));
                StateVector::zero(n)?.run_circuit_with(&noisy, |d, s| {
                    fs.push(exact_fidelity(s, &ideal[d])?);
                    bs.push(xeb(s, &ideal[d])?);
                    Ok(())
                })?;
                fidelity.push(fs);
                xebs.push(bs);
            }
            Ok(SeedRun { gates, ideal_xeb, fidelity, xeb: xebs })
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let k = seeds.len() as f64;
    let mean = |pick: &dyn Fn(&SeedRun) -> &Vec<f64>| -> Vec<f64> {
        (0..=depth).map(|d| runs.iter().map(|r| pick(r)[d]).sum::<f64>() / k).collect()
    };
    let gates = mean(&|r| &r.gates);
    let ideal_xeb = mean(&|r| &r.ideal_xeb);
    let start = d_star(&ideal_xeb, D_STAR_TOLERANCE);
    let mut curves = Vec::new();
    let mut fits = Vec::new();
    for (i, &f_gate) in f_gates.iter().enumerate() {
        let fidelity = mean(&|r| &r.fidelity[i]);
        let xeb = mean(&|r| &r.xeb[i]);
        let fit = start.and_then(|lo| {
            let hi = (lo..=depth).take_while(|&d| fidelity[d] >= DECAY_FIT_FLOOR).last()?;
            if hi < lo + 2 {
                return None;
            }
            let x = &gates[lo..=hi];
            let rate_f = -log_linear_slope(x, &fidelity[lo..=hi])?;
            let rate_b = -log_linear_slope(x, &xeb[lo..=hi])?;
            Some(DecayFit { f_gate, window: (lo, hi), rate_f, rate_b })
        });
        curves.push(NoiseCurve { f_gate, fidelity, xeb });
        fits.push(fit);
    }
    Ok(XebNoiseReport { n_qubits: n, seeds: seeds.len(), gates, ideal_xeb, d_star: start, curves, fits })
}

fn xeb_noise_run(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let (n, depth) = (cfg.need_n()?, cfg.need_depth()?);
    let report = xeb_noise(n, depth, &cfg.gate, &cfg.noise_levels(), &cfg.seed_list(16))?;
    let mut curves = Table::new("xeb-noise", &["f_gate", "depth", "gates", "B_ideal", "F_exact", "B", "F_from_B"]);
    for c in &report.curves {
        let from_b = report.d_star.map(|d| fidelity_from_xeb(&c.xeb, c.fidelity[d]));
        for d in 0..=depth {
            curves.push(vec![
                cell(c.f_gate),
                cell(d),
                cell(report.gates[d]),
                cell(report.ideal_xeb[d]),
                cell(c.fidelity[d]),
                cell(c.xeb[d]),
                opt(from_b.as_ref().map(|v| v[d])),
            ]);
        }
    }
    let mut fits = Table::new("xeb-decay", &["f_gate", "d_star", "window_end", "rate_F", "rate_B", "relative_gap"]);
    for (c, fit) in report.curves.iter().zip(&report.fits) {
        fits.push(vec![
            cell(c.f_gate),
            opt(report.d_star),
            opt(fit.map(|f| f.window.1)),
            opt(fit.map(|f| f.rate_f)),
            opt(fit.map(|f| f.rate_b)),
            opt(fit.map(|f| f.relative_gap())),
        ]);
    }
    let mut out = Artifacts::default();
    out.add("summary", fits);
    out.add("curves", curves);
    Ok(out)
}

/// One point of an ε_av-versus-χ sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub seed: u64,
    pub chi: usize,
    pub two_qubit_gates: usize,
    pub f_av: f64,
    pub estimated_fidelity: f64,
}

/// ε_av for every `(seed, chi)` pair, 1D when `grid` is `None`.
pub fn sweep_points(cfg: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    cfg.validate()?;
    let depth = cfg.need_depth()?;
    let chis = cfg.need_chi()?;
    let seeds = cfg.seed_list(1);
    let grid = cfg.grid.as_ref().map(|_| cfg.grid()).transpose()?;
    let points: Vec<(u64, usize)> = seeds.iter().flat_map(|&s| chis.iter().map(move |&c| (s, c))).collect();
    points
        .par_iter()
        .map(|&(seed, chi)| {
            let log = match &grid {
                Some(grid) => {
                    let circuit = grid_2d(grid, depth, seed, &GateSet::for_two_qubit(&cfg.gate)?)?;
                    grouped_run(&circuit, &cfg.groupings(grid)?, chi, false, None)?.0.take_log()
                }
                None => {
                    let circuit = brick_1d(cfg.need_n()?, depth, seed, &cfg.gate)?;
                    let mut mps = MpsState::zero(circuit.n_qubits, chi)?;
                    mps.run_circuit(&circuit)?;
                    mps.take_log()
                }
            };
            Ok(SweepPoint {
                seed,
                chi,
                two_qubit_gates: log.two_qubit_gates(),
                f_av: log.f_av(),
                estimated_fidelity: log.estimated_fidelity(),
            })
        })
        .collect()
}

fn sweep(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let mut t = Table::new("sweep", &["seed", "chi", "two_qubit_gates", "f_av", "eps_av", "F_est"]);
    for p in sweep_points(cfg)? {
        t.push(vec![cell(p.seed), cell(p.chi), cell(p.two_qubit_gates), cell(p.f_av), cell(1.0 - p.f_av), cell(p.estimated_fidelity)]);
    }
    let mut out = Artifacts::default();
    out.add("summary", t);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(kind: ExperimentKind) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(kind, 7);
        c.n_qubits = Some(6);
        c.depth = Some(6);
        c.chi = vec![4];
        c
    }

    #[test]
    fn config_round_trips_through_toml() {
        let mut c = cfg(ExperimentKind::Run2d);
        c.grid = Some("5x4".into());
        c.grouping = vec!["[2,1,2]".into(), "[1^5]".into()];
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn config_errors_name_the_line() {
        let text = "kind = \"run-1d\"\nseed = 1\nchi = [8, \"x\"]\n";
        match ExperimentConfig::from_toml(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let text = "kind = \"run-1d\"\nseed = 1\ncolour = 2\n";
        match ExperimentConfig::from_toml(text) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("colour"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
        assert!(ExperimentConfig::from_toml("kind = \"run-1d\"\n").is_err(), "seed is mandatory");
    }

    #[test]
    fn validation() {
        let mut c = cfg(ExperimentKind::Sweep);
        c.chi.clear();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = cfg(ExperimentKind::Run1d);
        c.gate = "nope".into();
        assert!(c.validate().is_err());
        let mut c = cfg(ExperimentKind::Run2d);
        c.grid = Some("sycamore54".into());
        assert!(c.validate().is_err(), "54 qubits need extended");
        c.extended = true;
        c.out = Some("/tmp/x".into());
        assert!(c.validate().is_ok());
        let mut c = cfg(ExperimentKind::Run2d);
        c.grid = Some("5x4".into());
        c.grouping = vec!["[2,2]".into()];
        assert!(c.validate().is_err());
    }

    #[test]
    fn table_round_trip_and_version_check() {
        let mut t = Table::new("demo", &["a", "b"]);
        t.push(vec!["1".into(), "-".into()]);
        t.push(vec!["0.1".into(), "2".into()]);
        let back = Table::parse(&t.to_text()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.f64_column("b"), vec![None, Some(2.0)]);
        let v2 = t.to_text().replacen("v1", "v2", 1);
        assert!(matches!(Table::parse(&v2), Err(Error::Parse { line: 1, .. })));
        assert!(Table::parse("a\tb\n").is_err());
        assert!(Table::parse("# chimps-table v1 demo\na\tb\n1\n").is_err());
    }

    #[test]
    fn oracle_cursor_matches_full_run() {
        let c = brick_1d(5, 4, 3, "CZ").unwrap();
        let mut full = StateVector::zero(5).unwrap();
        full.run_circuit(&c).unwrap();
        let mut cur = OracleCursor::new(&c).unwrap();
        cur.advance_to(2).unwrap();
        let s = cur.advance_to(4).unwrap();
        assert_eq!(s, &full);
    }

    #[test]
    fn run_1d_is_deterministic_and_exact_when_uncapped() {
        let mut c = cfg(ExperimentKind::Run1d);
        c.chi = vec![64];
        let a = run(&c).unwrap();
        let b = run(&c).unwrap();
        assert_eq!(a.table("metrics"), b.table("metrics"));
        let m = a.table("metrics").unwrap();
        for f in m.f64_column("F_exact").into_iter().flatten() {
            assert!((f - 1.0).abs() < 1e-10);
        }
        let log = a.table("fidelity").unwrap();
        assert_eq!(log.rows.len(), 15);
        assert!(log.f64_column("f").into_iter().all(|f| f == Some(1.0)));
    }

    #[test]
    fn written_artifacts_parse_back() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(ExperimentKind::CompareExact);
        let art = run(&c).unwrap();
        let paths = art.write(dir.path(), &c).unwrap();
        assert!(paths.iter().any(|p| p.ends_with("circuit.txt")));
        let circuit = Circuit::from_text(&fs::read_to_string(dir.path().join("circuit.txt")).unwrap()).unwrap();
        assert_eq!(Some(circuit), art.circuit);
        let summary = Table::parse(&fs::read_to_string(dir.path().join("summary.tsv")).unwrap()).unwrap();
        assert_eq!(summary.kind, "compare-exact");
        let back = ExperimentConfig::load(&dir.path().join("config.toml")).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn grouped_checkpoint_resume_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid::parse("3,2,3").unwrap();
        let circuit = grid_2d(&grid, 6, 5, &GateSet::for_two_qubit("CZ").unwrap()).unwrap();
        let groupings = vec![Grouping::parse("[1^3]", &grid).unwrap()];
        let (straight, _) = grouped_run(&circuit, &groupings, 3, false, None).unwrap();

        // run three cycles, checkpointing, then resume from the file
        let path = dir.path().join("ck.bin");
        let head = Circuit { layers: circuit.layers[..6].to_vec(), ..circuit.clone() };
        let tags = "[1^3]";
        let label = format!("circuit={:016x} chi=3 groupings={tags}", fingerprint(&circuit.to_text()));
        let mut partial = GroupedMpsState::zero(&groupings[0], 3).unwrap();
        partial.run_circuit(&head).unwrap();
        partial.save_checkpoint(&path, &label).unwrap();
        let (resumed, _) = grouped_run(&circuit, &groupings, 3, false, Some(&path)).unwrap();
        assert_eq!(resumed, straight);

        let other = grid_2d(&grid, 6, 6, &GateSet::for_two_qubit("CZ").unwrap()).unwrap();
        assert!(grouped_run(&other, &groupings, 3, false, Some(&path)).is_err());
    }

    #[test]
    fn gte_run_reports_collapse_for_several_chis() {
        let mut c = ExperimentConfig::new(ExperimentKind::RunGte, 1);
        c.chi = vec![4, 8];
        c.trials = 4;
        let art = run(&c).unwrap();
        assert_eq!(art.table("summary").unwrap().rows.len(), 2);
        assert!(art.table("collapse").is_some());
    }

    #[test]
    fn thread_count_honours_deterministic() {
        assert_eq!(thread_count(true).unwrap(), 1);
    }

    #[test]
    fn porter_thomas_table_has_one_row_per_depth() {
        let mut c = ExperimentConfig::new(ExperimentKind::PtTest, 1);
        c.n_qubits = Some(6);
        c.depth = Some(5);
        let t = run(&c).unwrap().table("summary").unwrap().clone();
        let depths: Vec<f64> = t.f64_column("depth").into_iter().map(Option::unwrap).collect();
        assert_eq!(depths, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(t.f64_at(0, "B"), Some(63.0));
    }

    #[test]
    fn noise_curves_are_aligned_with_depth() {
        let r = xeb_noise(6, 4, "CZ", &[1.0, 0.9], &[3, 4]).unwrap();
        assert_eq!(r.gates.len(), 5);
        assert_eq!(r.ideal_xeb[0], 63.0);
        let exact = &r.curves[0];
        assert!(exact.fidelity.iter().all(|&f| (f - 1.0).abs() < 1e-12));
        for d in 0..=4 {
            assert!((exact.xeb[d] - r.ideal_xeb[d]).abs() < 1e-9);
        }
        let noisy = &r.curves[1];
        assert_eq!(noisy.fidelity[0], 1.0);
        // one layer of noisy gates costs roughly one factor of f per gate
        let expected = 0.9f64.powf(r.gates[1] * 1.25);
        assert!((noisy.fidelity[1] - expected).abs() < 0.1, "{} vs {expected}", noisy.fidelity[1]);
    }
}
