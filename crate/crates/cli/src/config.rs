//! Run configuration: TOML (or a previous run's `manifest.json`), validated as
//! a whole before any compute.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use revanneal_core::closed::w_of_m0;
use revanneal_core::davies::DephasingModel;
use revanneal_core::operators::FULL_SPACE_MAX_N;
use revanneal_core::{BathSpec, ProblemSpec, ScheduleCurves, Space};

use crate::CliError;

/// Largest working dimension the density-matrix oracle accepts.
pub const ORACLE_MAX_DIM: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Unitary,
    Mcwf,
    Oracle,
}

/// Either an explicit list or an inclusive `start..=stop` range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::List(v) => v.clone(),
            Grid::Range { start, stop, step } => {
                if !(*step > 0.0) || stop < start {
                    return Vec::new();
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                (0..count)
                    .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
                    .collect()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub n: Option<usize>,
    #[serde(default = "default_p")]
    pub p: u32,
    #[serde(default = "default_space")]
    pub space: Space,
    /// Builtin schedule name or path to a `s,A_GHz,B_GHz` CSV.
    #[serde(default = "default_schedule")]
    pub schedule: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathConfig {
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default)]
    pub t_pause: f64,
    pub s_inv: Option<Grid>,
    #[serde(default = "default_m0")]
    pub m0: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathConfig {
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_omega_c")]
    pub omega_c_thz: f64,
    #[serde(default = "default_temperature")]
    pub temperature_ghz: f64,
    #[serde(default = "default_model")]
    pub model: DephasingModel,
    #[serde(default)]
    pub lamb_shift: bool,
}

impl Default for BathConfig {
    fn default() -> Self {
        BathConfig {
            eta: default_eta(),
            omega_c_thz: default_omega_c(),
            temperature_ghz: default_temperature(),
            model: default_model(),
            lamb_shift: false,
        }
    }
}

impl BathConfig {
    pub fn spec(&self) -> BathSpec {
        BathSpec {
            eta: self.eta,
            omega_c_thz: self.omega_c_thz,
            temperature_ghz: self.temperature_ghz,
            model: self.model,
            lamb_shift: self.lamb_shift,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub mode: Option<Mode>,
    #[serde(default = "default_trajectories")]
    pub trajectories: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
    /// Keep the lowest `truncation` instantaneous eigenstates.
    pub truncation: Option<usize>,
    #[serde(default = "default_chunk")]
    pub chunk: usize,
    /// Worker threads; `REVANNEAL_WORKERS` overrides it. Does not affect results.
    pub workers: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default = "default_spectrum_ds")]
    pub ds: f64,
    #[serde(default = "default_scan_ds")]
    pub scan_ds: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            levels: default_levels(),
            ds: default_spectrum_ds(),
            scan_ds: default_scan_ds(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub n: Vec<usize>,
    #[serde(default = "default_w0")]
    pub w0: usize,
    /// Truncation rank per `n` for the independent model (keys are `n`).
    #[serde(default = "default_compare_truncation")]
    pub truncation: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub problem: ProblemConfig,
    pub path: Option<PathConfig>,
    pub bath: Option<BathConfig>,
    pub solver: Option<SolverConfig>,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    pub compare: Option<CompareConfig>,
}

fn default_p() -> u32 {
    3
}
fn default_space() -> Space {
    Space::Dicke
}
fn default_schedule() -> String {
    "linear".into()
}
fn default_tau() -> f64 {
    100.0
}
fn default_m0() -> Vec<f64> {
    vec![0.9]
}
fn default_eta() -> f64 {
    1e-3
}
fn default_omega_c() -> f64 {
    1.0
}
fn default_temperature() -> f64 {
    1.57
}
fn default_model() -> DephasingModel {
    DephasingModel::Collective
}
fn default_trajectories() -> usize {
    1000
}
fn default_dt() -> f64 {
    0.02
}
fn default_tol() -> f64 {
    1e-9
}
fn default_chunk() -> usize {
    1024
}
fn default_levels() -> usize {
    6
}
fn default_spectrum_ds() -> f64 {
    0.01
}
fn default_scan_ds() -> f64 {
    1e-3
}
fn default_w0() -> usize {
    1
}
fn default_compare_truncation() -> BTreeMap<String, usize> {
    BTreeMap::from([("7".into(), 29), ("8".into(), 37)])
}
fn default_output() -> PathBuf {
    PathBuf::from("revanneal-out")
}

/// Reads a TOML config, or the `config` object of a `manifest.json`.
/// Relative paths inside are resolved against the file's directory.
pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(vec![format!("{}: {e}", path.display())]))?;
    let mut cfg: RunConfig = if path.extension().is_some_and(|e| e == "json") {
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(vec![format!("{}: {e}", path.display())]))?;
        let inner = value.get("config").cloned().unwrap_or(value);
        serde_json::from_value(inner)
            .map_err(|e| CliError::Config(vec![format!("{}: {e}", path.display())]))?
    } else {
        toml::from_str(&text)
            .map_err(|e| CliError::Config(vec![format!("{}: {e}", path.display())]))?
    };
    let base = path.parent().unwrap_or(Path::new("."));
    if cfg.output.is_relative() {
        cfg.output = base.join(&cfg.output);
    }
    if ScheduleCurves::builtin(&cfg.problem.schedule).is_err() {
        let p = Path::new(&cfg.problem.schedule);
        if p.is_relative() {
            cfg.problem.schedule = base.join(p).to_string_lossy().into_owned();
        }
    }
    Ok(cfg)
}

/// What a command needs from the config.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Run,
    GapScan,
    CompareModels,
    Validate,
}

/// Everything derived from a validated config.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub config: RunConfig,
    pub curves: ScheduleCurves,
    pub schedule_sha256: String,
    pub grid: Vec<f64>,
}

impl Resolved {
    pub fn n(&self) -> usize {
        self.config.problem.n.unwrap_or(0)
    }

    pub fn problem(&self, n: usize, space: Space) -> ProblemSpec {
        ProblemSpec::new(n, self.config.problem.p, self.curves.clone(), space)
            .expect("validated problem")
    }

    pub fn solver(&self) -> &SolverConfig {
        self.config.solver.as_ref().expect("validated solver")
    }

    pub fn path(&self) -> &PathConfig {
        self.config.path.as_ref().expect("validated path")
    }

    pub fn bath(&self) -> BathConfig {
        self.config.bath.clone().unwrap_or_default()
    }

    /// Independent-model truncation rank for `n` in model comparisons.
    pub fn compare_truncation(&self, n: usize) -> Option<usize> {
        self.config
            .compare
            .as_ref()
            .and_then(|c| c.truncation.get(&n.to_string()).copied())
    }

    /// SHA-256 of every result-affecting knob, used to key checkpoints.
    pub fn fingerprint(&self) -> String {
        let mut cfg = self.config.clone();
        cfg.output = PathBuf::new();
        if let Some(s) = cfg.solver.as_mut() {
            s.workers = None;
            s.chunk = 0;
        }
        cfg.problem.schedule = self.schedule_sha256.clone();
        let text = serde_json::to_string(&cfg).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

fn dim(n: usize, space: Space) -> usize {
    match space {
        Space::Dicke => n + 1,
        Space::Full => 1 << n,
    }
}

/// Validates the config for `cmd`, reporting every offending field at once.
pub fn validate(cfg: &RunConfig, cmd: Command) -> Result<Resolved, CliError> {
    let mut bad: Vec<String> = Vec::new();
    let pr = &cfg.problem;
    let n = match pr.n {
        None => {
            bad.push("problem.n: required".into());
            0
        }
        Some(n) if n < 2 => {
            bad.push(format!("problem.n: must be at least 2, got {n}"));
            n
        }
        Some(n) => n,
    };
    if pr.p < 2 {
        bad.push(format!("problem.p: must be at least 2, got {}", pr.p));
    } else if n >= 2 && pr.p as usize > n {
        bad.push(format!("problem.p: {} exceeds problem.n = {n}", pr.p));
    }
    if pr.space == Space::Full && n > FULL_SPACE_MAX_N {
        bad.push(format!(
            "problem.space: full space is limited to n <= {FULL_SPACE_MAX_N}, got n = {n}"
        ));
    }
    let curves = match ScheduleCurves::builtin(&pr.schedule) {
        Ok(c) => Some(c),
        Err(_) => match ScheduleCurves::from_csv_path(&pr.schedule) {
            Ok(c) => Some(c),
            Err(e) => {
                bad.push(format!("problem.schedule: '{}': {e}", pr.schedule));
                None
            }
        },
    };
    let needs_dynamics = matches!(
        cmd,
        Command::Run | Command::CompareModels | Command::Validate
    );
    let mut grid = Vec::new();
    if needs_dynamics {
        check_dynamics(cfg, cmd, n, &mut grid, &mut bad);
    }
    let sp = &cfg.spectrum;
    if sp.levels == 0 {
        bad.push("spectrum.levels: must be positive".into());
    }
    if !(sp.ds > 0.0 && sp.ds <= 0.5) {
        bad.push(format!("spectrum.ds: must lie in (0, 0.5], got {}", sp.ds));
    }
    if !(sp.scan_ds > 0.0 && sp.scan_ds <= 0.5) {
        bad.push(format!(
            "spectrum.scan_ds: must lie in (0, 0.5], got {}",
            sp.scan_ds
        ));
    }
    if !bad.is_empty() {
        return Err(CliError::Config(bad));
    }
    let curves = curves.expect("checked above");
    let schedule_sha256 = hex::encode(Sha256::digest(curves.canonical_text().as_bytes()));
    Ok(Resolved {
        config: cfg.clone(),
        curves,
        schedule_sha256,
        grid,
    })
}

fn check_dynamics(
    cfg: &RunConfig,
    cmd: Command,
    n: usize,
    grid: &mut Vec<f64>,
    bad: &mut Vec<String>,
) {
    let Some(path) = &cfg.path else {
        bad.push("path: required".into());
        return;
    };
    if !(path.tau.is_finite() && path.tau > 0.0) {
        bad.push(format!("path.tau: must be positive, got {}", path.tau));
    }
    if !(path.t_pause.is_finite() && path.t_pause >= 0.0) {
        bad.push(format!("path.t_pause: must be >= 0, got {}", path.t_pause));
    }
    match &path.s_inv {
        None => bad.push("path.s_inv: required".into()),
        Some(g) => {
            *grid = g.values();
            if grid.is_empty() {
                bad.push("path.s_inv: grid is empty".into());
            }
            let outside: Vec<String> = grid
                .iter()
                .filter(|s| !(**s > 0.0 && **s < 1.0))
                .map(|s| s.to_string())
                .collect();
            if !outside.is_empty() {
                bad.push(format!(
                    "path.s_inv: values outside (0, 1): {}",
                    outside.join(", ")
                ));
            }
            if grid.windows(2).any(|w| w[1] <= w[0]) {
                bad.push("path.s_inv: values must be strictly increasing".into());
            }
        }
    }
    let Some(solver) = &cfg.solver else {
        bad.push("solver: required".into());
        return;
    };
    let mode = match solver.mode {
        None => {
            bad.push("solver.mode: required (unitary, mcwf or oracle)".into());
            return;
        }
        Some(m) => m,
    };
    if cmd == Command::CompareModels || (cmd == Command::Validate && cfg.compare.is_some()) {
        check_compare(cfg, mode, bad);
    }
    if cmd == Command::Run || (cmd == Command::Validate && cfg.compare.is_none()) {
        if path.m0.is_empty() {
            bad.push("path.m0: at least one value required".into());
        }
        if n >= 2 {
            for &m0 in &path.m0 {
                if w_of_m0(n, m0).is_err() {
                    bad.push(format!(
                        "path.m0: {m0} does not give an integer w for n = {n}"
                    ));
                }
            }
        }
        if mode == Mode::Oracle && dim(n, cfg.problem.space) > ORACLE_MAX_DIM {
            bad.push(format!(
                "solver.mode: oracle is limited to dimension {ORACLE_MAX_DIM}, n = {n} in {:?} space has {}",
                cfg.problem.space,
                dim(n, cfg.problem.space)
            ));
        }
    }
    match mode {
        Mode::Unitary => {
            if cfg.bath.is_some() {
                bad.push("bath: not allowed with solver.mode = unitary".into());
            }
            if solver.truncation.is_some() {
                bad.push("solver.truncation: not allowed with solver.mode = unitary".into());
            }
            if cmd == Command::CompareModels {
                bad.push("solver.mode: compare-models needs mcwf or oracle".into());
            }
        }
        Mode::Mcwf | Mode::Oracle => {
            let bath = cfg.bath.clone().unwrap_or_default();
            if !(bath.eta.is_finite() && bath.eta >= 0.0) {
                bad.push(format!("bath.eta: must be >= 0, got {}", bath.eta));
            }
            if !(bath.omega_c_thz.is_finite() && bath.omega_c_thz > 0.0) {
                bad.push(format!(
                    "bath.omega_c_thz: must be positive, got {}",
                    bath.omega_c_thz
                ));
            }
            if !(bath.temperature_ghz.is_finite() && bath.temperature_ghz > 0.0) {
                bad.push(format!(
                    "bath.temperature_ghz: must be positive, got {}",
                    bath.temperature_ghz
                ));
            }
            if solver.truncation == Some(0) {
                bad.push("solver.truncation: must be positive".into());
            }
        }
    }
    if mode == Mode::Mcwf {
        if solver.trajectories < 2 {
            bad.push(format!(
                "solver.trajectories: need at least 2, got {}",
                solver.trajectories
            ));
        }
        if !(solver.dt.is_finite() && solver.dt > 0.0) {
            bad.push(format!("solver.dt: must be positive, got {}", solver.dt));
        }
    }
    if !(solver.tol.is_finite() && solver.tol > 0.0) {
        bad.push(format!("solver.tol: must be positive, got {}", solver.tol));
    }
    if solver.chunk == 0 {
        bad.push("solver.chunk: must be positive".into());
    }
    if solver.workers == Some(0) {
        bad.push("solver.workers: must be positive".into());
    }
}

fn check_compare(cfg: &RunConfig, mode: Mode, bad: &mut Vec<String>) {
    let Some(c) = &cfg.compare else {
        bad.push("compare: required for compare-models".into());
        return;
    };
    if c.n.is_empty() {
        bad.push("compare.n: at least one value required".into());
    }
    for &n in &c.n {
        if !(3..=8).contains(&n) {
            bad.push(format!("compare.n: {n} outside 3..=8"));
        } else if (cfg.problem.p as usize) > n {
            bad.push(format!(
                "compare.n: {n} is smaller than problem.p = {}",
                cfg.problem.p
            ));
        } else if c.w0 > n {
            bad.push(format!("compare.w0: {} exceeds n = {n}", c.w0));
        } else if mode == Mode::Oracle && (1usize << n) > ORACLE_MAX_DIM {
            bad.push(format!(
                "compare.n: {n} needs the full space, beyond the oracle limit of dimension {ORACLE_MAX_DIM}"
            ));
        }
    }
    for (k, &r) in &c.truncation {
        if k.parse::<usize>().is_err() {
            bad.push(format!("compare.truncation: key '{k}' is not an integer"));
        }
        if r == 0 {
            bad.push(format!("compare.truncation.{k}: must be positive"));
        }
    }
    if cfg
        .bath
        .as_ref()
        .is_some_and(|b| b.model != DephasingModel::Collective)
    {
        bad.push("bath.model: compare-models runs both models; leave it at collective".into());
    }
}
