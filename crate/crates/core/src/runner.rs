//! Config-driven experiment sweeps with CSV output and a JSON run manifest.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::circuit::{self, Circuit};
use crate::density::{self, DensityMatrix};
use crate::encoding::{self, CodeKind};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::metrics::{self, ObservableSpec};
use crate::model::{EncodedModel, InitialState, ModelParams, RateConvention};
use crate::noise::{CalibrationData, Confusion, NoiseModel};
use crate::oracle::{self, TrajectorySnapshot};
use crate::scalar::c;
use crate::transpile::{self, CouplingMap};

/// Tolerance on `t_final / dt` being an integer.
pub const STEP_TOL: f64 = 1e-9;
pub const DEFAULT_SHOTS: u64 = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    TrotterSweep,
    NoiseSweep,
    InfidelityVsTime,
    GammaSweep,
    Observables,
    Correlations,
    GateCounts,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::TrotterSweep,
        ExperimentKind::NoiseSweep,
        ExperimentKind::InfidelityVsTime,
        ExperimentKind::GammaSweep,
        ExperimentKind::Observables,
        ExperimentKind::Correlations,
        ExperimentKind::GateCounts,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::TrotterSweep => "trotter_sweep",
            ExperimentKind::NoiseSweep => "noise_sweep",
            ExperimentKind::InfidelityVsTime => "infidelity_vs_time",
            ExperimentKind::GammaSweep => "gamma_sweep",
            ExperimentKind::Observables => "observables",
            ExperimentKind::Correlations => "correlations",
            ExperimentKind::GateCounts => "gate_counts",
        }
    }

    /// CSV header, fixed per kind.
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::TrotterSweep | ExperimentKind::NoiseSweep | ExperimentKind::GammaSweep => {
                &["xi", "order", "dt", "gamma", "n_steps", "t_final", "avg_infidelity", "final_infidelity"]
            }
            ExperimentKind::InfidelityVsTime => &["xi", "order", "dt", "gamma", "n_steps", "step", "t", "infidelity"],
            ExperimentKind::Observables => &[
                "xi",
                "order",
                "dt",
                "gamma",
                "step",
                "t",
                "boson_number_sim",
                "boson_number_exact",
                "sigma_z_sim",
                "sigma_z_exact",
                "boson_number_sampled",
                "boson_number_mitigated",
                "sigma_z_sampled",
                "sigma_z_mitigated",
            ],
            ExperimentKind::Correlations => &[
                "xi",
                "order",
                "dt",
                "gamma",
                "step",
                "t",
                "czz_sim",
                "czz_exact",
                "cxx_sim",
                "cxx_exact",
                "czz_sampled",
                "czz_mitigated",
                "cxx_sampled",
                "cxx_mitigated",
            ],
            ExperimentKind::GateCounts => &[
                "n_spins",
                "d_ho",
                "order",
                "standard_binary_single",
                "standard_binary_cx",
                "gray_single",
                "gray_cx",
            ],
        }
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub model: ModelParams<f64>,
    pub code: CodeKind,
    pub orders: Vec<u8>,
    pub dt: Vec<f64>,
    pub t_final: f64,
    pub xi: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Sampled mode when set; exact expectations otherwise.
    pub shots: Option<u64>,
    pub seed: u64,
    pub convention: RateConvention,
    /// Device calibration JSON; the bundled Jakarta averages when absent.
    pub calibration: Option<PathBuf>,
    pub output: PathBuf,
    pub initial_state: Option<InitialState>,
    /// Spin counts of the `gate_counts` grid.
    pub spins: Vec<usize>,
    /// Oscillator levels of the `gate_counts` grid.
    pub levels: Vec<usize>,
}

impl ExperimentConfig {
    /// Defaults for `kind`, following the published parameter choices.
    pub fn new(kind: ExperimentKind) -> Self {
        let mut cfg = Self {
            kind,
            model: ModelParams::single_spin(),
            code: CodeKind::Gray,
            orders: vec![2],
            dt: vec![0.2],
            t_final: 2.0,
            xi: vec![0.0],
            gamma: vec![1.0],
            shots: None,
            seed: 0,
            convention: RateConvention::default(),
            calibration: None,
            output: PathBuf::from(format!("{}.csv", kind.name())),
            initial_state: None,
            spins: vec![1, 2],
            levels: vec![4, 8],
        };
        match kind {
            ExperimentKind::TrotterSweep => {
                cfg.orders = vec![1, 2];
                cfg.dt = vec![0.1, 0.2, 0.3, 0.4, 0.5];
                cfg.gamma = vec![0.0, 1.0];
            }
            ExperimentKind::NoiseSweep => cfg.xi = vec![0.01, 0.1, 1.0],
            ExperimentKind::InfidelityVsTime => {
                cfg.orders = vec![1, 2];
                cfg.xi = vec![0.01, 0.1, 1.0];
            }
            ExperimentKind::GammaSweep => {
                cfg.xi = vec![0.0, 0.01];
                cfg.gamma = vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5];
            }
            ExperimentKind::Observables => cfg.xi = vec![0.0, 0.01, 0.1, 1.0],
            ExperimentKind::Correlations => {
                cfg.model = ModelParams::two_spins();
                cfg.xi = vec![0.0, 0.01, 0.1, 1.0];
            }
            ExperimentKind::GateCounts => cfg.orders = vec![1, 2],
        }
        cfg
    }

    /// Parses a JSON config. Keys present in the file replace the defaults of
    /// its `kind` (or of `kind` when the file has none); nested objects merge.
    pub fn from_json(text: &str, kind: Option<ExperimentKind>) -> Result<Self> {
        let file: Value = serde_json::from_str(text)?;
        let file_kind = match file.get("kind") {
            Some(k) => Some(serde_json::from_value::<ExperimentKind>(k.clone())?),
            None => None,
        };
        let kind = match (kind, file_kind) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Config(vec![format!("config kind `{}` does not match `{}`", b.name(), a.name())]));
            }
            (Some(k), _) | (None, Some(k)) => k,
            (None, None) => return Err(Error::Config(vec!["config has no `kind`".into()])),
        };
        let mut merged = serde_json::to_value(Self::new(kind))?;
        merge(&mut merged, file);
        Ok(serde_json::from_value(merged)?)
    }

    pub fn load(path: &Path, kind: Option<ExperimentKind>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?, kind)
    }

    /// Step count for `dt`: `t_final / dt` rounded to the nearest integer.
    pub fn n_steps(&self, dt: f64) -> usize {
        (self.t_final / dt).round() as usize
    }

    pub fn initial_state(&self, n_spins: usize) -> InitialState {
        self.initial_state.clone().unwrap_or_else(|| InitialState::first_excited(n_spins))
    }

    pub fn load_calibration(&self) -> Result<CalibrationData> {
        let cal = match &self.calibration {
            Some(p) => CalibrationData::load(p)?,
            None => CalibrationData::jakarta_average(),
        };
        cal.validate()?;
        Ok(cal)
    }

    /// Every problem with the config, reported together.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let kind = self.kind;
        let sweeps = kind != ExperimentKind::GateCounts;
        if let Err(e) = self.model.validate() {
            bad.push(format!("model: {e}"));
        }
        if self.orders.is_empty() {
            bad.push("orders is empty".into());
        }
        for &o in &self.orders {
            if o != 1 && o != 2 {
                bad.push(format!("Trotter order must be 1 or 2, got {o}"));
            }
        }
        if self.gamma.is_empty() {
            bad.push("gamma grid is empty".into());
        }
        for &g in &self.gamma {
            if !(g >= 0.0 && g.is_finite()) {
                bad.push(format!("gamma must be finite and >= 0, got {g}"));
            }
        }
        if sweeps {
            if !(self.t_final > 0.0 && self.t_final.is_finite()) {
                bad.push(format!("t_final must be positive, got {}", self.t_final));
            }
            if self.dt.is_empty() {
                bad.push("dt grid is empty".into());
            }
            for &dt in &self.dt {
                if !(dt > 0.0 && dt.is_finite()) {
                    bad.push(format!("dt must be positive, got {dt}"));
                } else if self.t_final > 0.0 && self.n_steps(dt) == 0 {
                    bad.push(format!("dt = {dt} exceeds t_final = {}", self.t_final));
                }
            }
            if self.xi.is_empty() {
                bad.push("xi grid is empty".into());
            }
            for &x in &self.xi {
                if !(0.0..=1.0).contains(&x) {
                    bad.push(format!("noise factor must lie in [0, 1], got {x}"));
                }
            }
            let state = self.initial_state(self.model.n_spins);
            if state.spins.len() != self.model.n_spins {
                bad.push(format!("initial state has {} spins, model has {}", state.spins.len(), self.model.n_spins));
            }
            if state.boson_level >= self.model.levels {
                bad.push(format!("initial oscillator level {} >= levels {}", state.boson_level, self.model.levels));
            }
        } else {
            for (name, empty) in [("spins", self.spins.is_empty()), ("levels", self.levels.is_empty())] {
                if empty {
                    bad.push(format!("{name} grid is empty"));
                }
            }
            for &n in &self.spins {
                if n == 0 {
                    bad.push("spin count must be >= 1".into());
                }
            }
            for &l in &self.levels {
                if l < 2 {
                    bad.push(format!("oscillator levels must be >= 2, got {l}"));
                }
            }
        }
        match self.shots {
            Some(0) => bad.push("shots must be >= 1".into()),
            Some(_) if !matches!(kind, ExperimentKind::Observables | ExperimentKind::Correlations) => {
                bad.push(format!("shots are only meaningful for observables and correlations, not {}", kind.name()));
            }
            _ => {}
        }
        if kind == ExperimentKind::Correlations && self.model.n_spins != 2 {
            bad.push(format!("correlations need a two-spin model, got {} spins", self.model.n_spins));
        }
        match self.load_calibration() {
            Ok(cal) => {
                let n = cal.qubits.len();
                let widths: Vec<usize> = if sweeps {
                    vec![width_of(self.model.n_spins, self.model.levels)]
                } else {
                    self.spins.iter().flat_map(|&s| self.levels.iter().map(move |&l| width_of(s, l))).collect()
                };
                let needs_device = !sweeps || self.xi.iter().any(|&x| x > 0.0);
                if let Some(w) = widths.into_iter().filter(|&w| needs_device && w > n).max() {
                    bad.push(format!("circuit needs {w} qubits, device has {n}"));
                }
            }
            Err(e) => bad.push(format!("calibration: {e}")),
        }
        if bad.is_empty() { Ok(()) } else { Err(Error::Config(bad)) }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

fn width_of(n_spins: usize, levels: usize) -> usize {
    2 * n_spins + encoding::qubits_for(levels)
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

/// One CSV field.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format!("{v:.11e}"),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u8> for Cell {
    fn from(v: u8) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Float)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric values of column `name`; empty and text cells are skipped.
    pub fn floats(&self, name: &str) -> Vec<f64> {
        let Some(i) = self.column(name) else { return Vec::new() };
        self.rows
            .iter()
            .filter_map(|r| match &r[i] {
                Cell::Float(v) => Some(*v),
                Cell::Int(v) => Some(*v as f64),
                _ => None,
            })
            .collect()
    }
}

/// Writes `table` as CSV with floats at 12 significant digits. NaN anywhere
/// aborts before the file is touched.
pub fn emit_csv(table: &Table, path: &Path) -> Result<()> {
    for (r, row) in table.rows.iter().enumerate() {
        if row.len() != table.columns.len() {
            return Err(Error::DimensionMismatch(row.len(), table.columns.len()));
        }
        if let Some(i) = row.iter().position(|c| matches!(c, Cell::Float(v) if v.is_nan())) {
            return Err(Error::NanOutput { column: table.columns[i].clone(), row: r });
        }
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::render))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: ExperimentKind,
    pub config_sha256: String,
    pub version: String,
    pub convention: RateConvention,
    pub rows: usize,
    pub output: PathBuf,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub csv: PathBuf,
    pub manifest: PathBuf,
    pub table: Table,
}

/// Manifest path next to the CSV.
pub fn manifest_path(csv: &Path) -> PathBuf {
    csv.with_extension("manifest.json")
}

/// Validates, computes and writes the CSV and its manifest.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    let table = compute(config)?;
    emit_csv(&table, &config.output)?;
    let manifest = Manifest {
        experiment: config.kind,
        config_sha256: config.hash(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        convention: config.convention,
        rows: table.rows.len(),
        output: config.output.clone(),
        config: config.clone(),
    };
    let mpath = manifest_path(&config.output);
    std::fs::write(&mpath, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(RunOutput { csv: config.output.clone(), manifest: mpath, table })
}

/// Validates and computes the result table without writing anything.
pub fn compute(config: &ExperimentConfig) -> Result<Table> {
    config.validate()?;
    match config.kind {
        ExperimentKind::GateCounts => gate_counts(config),
        _ => sweep(config),
    }
}

/// Coupling map of the calibrated two-qubit gates.
pub fn device_map(cal: &CalibrationData) -> Result<CouplingMap> {
    let mut edges = BTreeSet::new();
    for g in cal.gates.iter().filter(|g| g.kind == "cx" && g.qubits.len() == 2) {
        let (a, b) = (g.qubits[0], g.qubits[1]);
        edges.insert((a.min(b), a.max(b)));
    }
    CouplingMap::new(cal.qubits.len(), edges.into_iter().collect())
}

/// Circuit for `n_steps` steps from `state`, placed and routed on `map`.
pub fn device_circuit(
    model: &EncodedModel<f64>,
    state: &InitialState,
    n_steps: usize,
    dt: f64,
    order: u8,
    map: &CouplingMap,
) -> Result<Circuit> {
    let logical = circuit::assemble_evolution(model, state, n_steps, dt, order)?;
    let layout = transpile::default_layout(&model.layout, map)?;
    transpile::transpile(&logical, map, &layout)
}

/// Native gate counts of one evolution step (no preparation or readout)
/// after transpilation onto `map`.
pub fn step_gate_count(model: &EncodedModel<f64>, dt: f64, order: u8, map: &CouplingMap) -> Result<transpile::GateCount> {
    let mut logical = Circuit::new(model.layout.wires());
    logical.extend(circuit::evolution_step(model, dt, order)?)?;
    let layout = transpile::default_layout(&model.layout, map)?;
    transpile::count_gates(&transpile::transpile(&logical, map, &layout)?)
}

fn gate_counts(cfg: &ExperimentConfig) -> Result<Table> {
    let map = device_map(&cfg.load_calibration()?)?;
    let mut grid = Vec::new();
    for &n in &cfg.spins {
        for &l in &cfg.levels {
            for &o in &cfg.orders {
                grid.push((n, l, o));
            }
        }
    }
    let dt = cfg.dt.first().copied().unwrap_or(0.2);
    let gamma = cfg.gamma[0];
    let rows = grid
        .par_iter()
        .map(|&(n, l, o)| {
            let base = if n == cfg.model.n_spins {
                cfg.model
            } else if n == 1 {
                ModelParams::single_spin()
            } else {
                ModelParams { n_spins: n, ..ModelParams::two_spins() }
            };
            let params = ModelParams { levels: l, gamma, ..base };
            let mut row: Vec<Cell> = vec![n.into(), l.into(), o.into()];
            for code in [CodeKind::StandardBinary, CodeKind::Gray] {
                let model = EncodedModel::new(params, code, cfg.convention)?;
                let count = step_gate_count(&model, dt, o, &map)?;
                row.extend([count.single_qubit.into(), count.cx.into()]);
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(cfg.kind.columns());
    table.rows = rows;
    Ok(table)
}

/// Simulated and exact system states at `t = 0, dt, ..., n·dt`, with the
/// readout confusion of the device qubits holding the system at each
/// snapshot.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub sim: Vec<DensityMatrix<f64>>,
    pub exact: Vec<DensityMatrix<f64>>,
    pub readout: Vec<Option<Vec<Confusion>>>,
}

impl Trajectory {
    pub fn infidelities(&self) -> Result<Vec<f64>> {
        self.sim.iter().zip(&self.exact).map(|(a, b)| metrics::infidelity(a, b)).collect()
    }

    pub fn averaged_infidelity(&self) -> Result<f64> {
        let snaps = |v: &[DensityMatrix<f64>]| -> Vec<TrajectorySnapshot<f64>> {
            self.times.iter().zip(v).map(|(&t, rho)| TrajectorySnapshot { t, rho: rho.clone() }).collect()
        };
        metrics::time_averaged_infidelity(&snaps(&self.sim), &snaps(&self.exact))
    }
}

/// Simulated system states at every barrier. At `xi = 0` the logical
/// circuit runs directly; otherwise it is transpiled onto the device and
/// every gate is followed by its calibrated error channel.
pub fn simulate_states(
    model: &EncodedModel<f64>,
    state: &InitialState,
    n_steps: usize,
    dt: f64,
    order: u8,
    xi: f64,
    cal: &CalibrationData,
) -> Result<(Vec<DensityMatrix<f64>>, Vec<Option<Vec<Confusion>>>)> {
    if xi == 0.0 {
        let logical = circuit::assemble_evolution(model, state, n_steps, dt, order)?;
        let res = density::simulate_from_zero(&logical, None)?;
        let n = res.snapshots.len();
        return Ok((res.snapshots, vec![None; n]));
    }
    let map = device_map(cal)?;
    let c = device_circuit(model, state, n_steps, dt, order, &map)?;
    let noise = NoiseModel::<f64>::build(cal, xi)?;
    let res = density::simulate_from_zero(&c, Some(&noise))?;
    let readout = (0..res.snapshots.len())
        .map(|k| Some(c.system_wires_at(k).into_iter().map(|w| noise.readout(c.device()[w])).collect()))
        .collect();
    Ok((res.snapshots, readout))
}

type OracleKey = (u64, u64, usize);

fn oracle_key(gamma: f64, dt: f64, n: usize) -> OracleKey {
    (gamma.to_bits(), dt.to_bits(), n)
}

fn exact_states(model: &EncodedModel<f64>, state: &InitialState, dt: f64, n: usize) -> Result<Vec<DensityMatrix<f64>>> {
    let rho0 = model.initial_density_matrix(state)?;
    let snaps = oracle::evolve_exact(&rho0, model, &oracle::uniform_grid(dt, n))?;
    Ok(snaps.into_iter().map(|s| s.rho).collect())
}

/// Per-point work item of a sweep.
#[derive(Debug, Clone, Copy)]
struct Point {
    index: usize,
    xi: f64,
    order: u8,
    gamma: f64,
    dt: f64,
}

fn sweep(cfg: &ExperimentConfig) -> Result<Table> {
    let cal = cfg.load_calibration()?;
    let state = cfg.initial_state(cfg.model.n_spins);
    let mut points = Vec::new();
    for &xi in &cfg.xi {
        for &order in &cfg.orders {
            for &gamma in &cfg.gamma {
                for &dt in &cfg.dt {
                    points.push(Point { index: points.len(), xi, order, gamma, dt });
                }
            }
        }
    }
    for &dt in &cfg.dt {
        let ratio = cfg.t_final / dt;
        if (ratio - ratio.round()).abs() > STEP_TOL {
            log::warn!(
                "t_final / dt = {ratio} is not an integer for dt = {dt}; running {} steps to t = {}",
                cfg.n_steps(dt),
                cfg.n_steps(dt) as f64 * dt
            );
        }
    }
    let model_for = |gamma: f64| EncodedModel::new(cfg.model.with_gamma(gamma), cfg.code, cfg.convention);

    let keys: Vec<(f64, f64)> = {
        let mut seen = BTreeSet::new();
        points.iter().filter(|p| seen.insert(oracle_key(p.gamma, p.dt, 0))).map(|p| (p.gamma, p.dt)).collect()
    };
    let exact: HashMap<OracleKey, Vec<DensityMatrix<f64>>> = keys
        .par_iter()
        .map(|&(gamma, dt)| {
            let n = cfg.n_steps(dt);
            Ok((oracle_key(gamma, dt, n), exact_states(&model_for(gamma)?, &state, dt, n)?))
        })
        .collect::<Result<_>>()?;

    let blocks = points
        .par_iter()
        .map(|p| {
            let model = model_for(p.gamma)?;
            let n = cfg.n_steps(p.dt);
            log::info!("{}: xi={} order={} gamma={} dt={} ({} steps)", cfg.kind.name(), p.xi, p.order, p.gamma, p.dt, n);
            let (sim, readout) = simulate_states(&model, &state, n, p.dt, p.order, p.xi, &cal)?;
            let traj = Trajectory {
                times: oracle::uniform_grid(p.dt, n),
                sim,
                exact: exact[&oracle_key(p.gamma, p.dt, n)].clone(),
                readout,
            };
            if traj.sim.len() != traj.exact.len() {
                return Err(Error::GridMismatch(format!("{} snapshots vs {} oracle states", traj.sim.len(), traj.exact.len())));
            }
            rows_for(cfg, &model, p, n, &traj)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(cfg.kind.columns());
    table.rows = blocks.into_iter().flatten().collect();
    Ok(table)
}

fn check_infidelity(v: f64) -> Result<f64> {
    if (0.0..=1.0 + 1e-9).contains(&v) {
        Ok(v)
    } else {
        Err(Error::InvalidState(format!("infidelity {v} outside [0, 1]")))
    }
}

fn rows_for(cfg: &ExperimentConfig, model: &EncodedModel<f64>, p: &Point, n: usize, traj: &Trajectory) -> Result<Vec<Vec<Cell>>> {
    let head = |step: Option<usize>| -> Vec<Cell> {
        let mut v = vec![p.xi.into(), p.order.into(), p.dt.into(), p.gamma.into()];
        if let Some(k) = step {
            v.push(k.into());
            v.push(traj.times[k].into());
        }
        v
    };
    match cfg.kind {
        ExperimentKind::TrotterSweep | ExperimentKind::NoiseSweep | ExperimentKind::GammaSweep => {
            let avg = check_infidelity(traj.averaged_infidelity()?)?;
            let fin = check_infidelity(*traj.infidelities()?.last().expect("nonempty"))?;
            let mut row = head(None);
            row.extend([n.into(), (n as f64 * p.dt).into(), avg.into(), fin.into()]);
            Ok(vec![row])
        }
        ExperimentKind::InfidelityVsTime => {
            let inf = traj.infidelities()?;
            inf.into_iter()
                .enumerate()
                .map(|(k, v)| {
                    let mut row = vec![p.xi.into(), p.order.into(), p.dt.into(), p.gamma.into(), n.into(), k.into(), traj.times[k].into()];
                    row.push(check_infidelity(v)?.into());
                    Ok(row)
                })
                .collect()
        }
        ExperimentKind::Observables => {
            let num = metrics::observable_matrix(ObservableSpec::BosonNumber, model)?;
            let sz = metrics::observable_matrix(ObservableSpec::SigmaZ(0), model)?;
            (0..traj.sim.len())
                .map(|k| {
                    let (s, e) = (&traj.sim[k], &traj.exact[k]);
                    let mut row = head(Some(k));
                    row.extend([
                        metrics::expectation_of(s, &num)?.into(),
                        metrics::expectation_of(e, &num)?.into(),
                        metrics::expectation_of(s, &sz)?.into(),
                        metrics::expectation_of(e, &sz)?.into(),
                    ]);
                    match cfg.shots {
                        Some(shots) => {
                            let (raw, mit) = sampled_distributions(s, traj.readout[k].as_deref(), shots, sample_seed(cfg.seed, p.index, k, 0))?;
                            for op in [&num, &sz] {
                                row.push(diagonal_expectation(&raw, op).into());
                                row.push(diagonal_expectation(&mit, op).into());
                            }
                        }
                        None => row.extend(std::iter::repeat_n(Cell::Empty, 4)),
                    }
                    Ok(row)
                })
                .collect()
        }
        ExperimentKind::Correlations => {
            let z0 = metrics::observable_matrix(ObservableSpec::SigmaZ(0), model)?;
            let z1 = metrics::observable_matrix(ObservableSpec::SigmaZ(1), model)?;
            let spins = model.layout.system_spin_qubits();
            let hadamard = hadamard();
            (0..traj.sim.len())
                .map(|k| {
                    let (s, e) = (&traj.sim[k], &traj.exact[k]);
                    let mut row = head(Some(k));
                    row.extend([
                        metrics::connected_correlation(s, metrics::CorrelationPair::ZZ, model)?.into(),
                        metrics::connected_correlation(e, metrics::CorrelationPair::ZZ, model)?.into(),
                        metrics::connected_correlation(s, metrics::CorrelationPair::XX, model)?.into(),
                        metrics::connected_correlation(e, metrics::CorrelationPair::XX, model)?.into(),
                    ]);
                    match cfg.shots {
                        Some(shots) => {
                            let readout = traj.readout[k].as_deref();
                            let (zr, zm) = sampled_distributions(s, readout, shots, sample_seed(cfg.seed, p.index, k, 0))?;
                            let mut rotated = s.clone();
                            for &q in &spins {
                                rotated.apply_unitary(&hadamard, &[q])?;
                            }
                            let (xr, xm) = sampled_distributions(&rotated, readout, shots, sample_seed(cfg.seed, p.index, k, 1))?;
                            for dist in [&zr, &zm, &xr, &xm] {
                                row.push(diagonal_covariance(dist, &z0, &z1).into());
                            }
                        }
                        None => row.extend(std::iter::repeat_n(Cell::Empty, 4)),
                    }
                    Ok(row)
                })
                .collect()
        }
        ExperimentKind::GateCounts => unreachable!("gate counts do not sweep trajectories"),
    }
}

fn hadamard() -> CMatrix<f64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_row_slice(2, 2, &[c(s, 0.), c(s, 0.), c(s, 0.), c(-s, 0.)])
}

/// Independent stream per grid point, snapshot and measurement basis.
fn sample_seed(seed: u64, point: usize, step: usize, basis: u64) -> u64 {
    let mut h = Sha256::new();
    for v in [seed, point as u64, step as u64, basis] {
        h.update(v.to_le_bytes());
    }
    u64::from_le_bytes(h.finalize()[..8].try_into().expect("8 bytes"))
}

/// Raw and readout-mitigated outcome distributions of `shots` samples.
fn sampled_distributions(rho: &DensityMatrix<f64>, readout: Option<&[Confusion]>, shots: u64, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let counts = density::sample_counts(rho, shots, readout, seed)?;
    let raw = counts.probabilities();
    let mitigated = match readout {
        Some(r) => density::mitigate_readout(&counts, r)?,
        None => raw.clone(),
    };
    Ok((raw, mitigated))
}

fn diagonal_expectation(probs: &[f64], op: &CMatrix<f64>) -> f64 {
    probs.iter().enumerate().map(|(i, p)| p * op[(i, i)].re).sum()
}

fn diagonal_covariance(probs: &[f64], a: &CMatrix<f64>, b: &CMatrix<f64>) -> f64 {
    let ab = probs.iter().enumerate().map(|(i, p)| p * a[(i, i)].re * b[(i, i)].re).sum::<f64>();
    ab - diagonal_expectation(probs, a) * diagonal_expectation(probs, b)
}
