//! Batch front-end behind the `quenchbat` binary.
//!
//! A run is described by a TOML file. The manifest written next to the CSV
//! output embeds the fully resolved configuration as JSON and can be passed
//! back through `--config` to repeat the run.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::analysis::{self, RecurrenceOptions, SweepMeta, DEFAULT_KINK_THRESHOLD};
use crate::models::{
    build_cluster_ising, build_ising, build_ssh, build_xy, ClusterIsingParams, IsingParams, MaxNeighbor,
    SshDimerization, SshHoppings, SshLineProtocol, XyParams,
};
use crate::quench::{default_power_tau_grid, log_tau_grid, AnyQuench, ChargingTime, Engine, QuenchSpec};
use crate::spectral::{Beta, BzGrid, MomentumOffset, ThermalSpec};

/// Dialect of `--config` files, recorded in every manifest.
pub const CONFIG_DIALECT: &str = "toml-1.0";
pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Parser, Debug, Clone)]
#[command(name = "quenchbat", version, about = "Stored energy of double-quench free-fermion batteries")]
pub struct Args {
    /// Run configuration (TOML), or a manifest.json from an earlier run.
    #[arg(long)]
    pub config: PathBuf,
    /// Worker threads; defaults to one per core.
    #[arg(long, env = "QUENCHBAT_WORKERS")]
    pub workers: Option<usize>,
    /// Output directory; overrides `output` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Recorded in the manifest. The pipeline draws no random numbers.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("numerical failure: {0}")]
    Numerical(#[from] crate::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config { .. } => 2,
            RunError::Numerical(_) => 3,
            RunError::Io { .. } => 1,
        }
    }
}

fn config_err(field: impl Into<String>, message: impl Into<String>) -> RunError {
    RunError::Config { field: field.into(), message: message.into() }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Curve,
    Sweep,
    Power,
    Scaling,
    Kinks,
    Recurrence,
}

/// A real number or one of the spellings of infinity (`"inf"`, `"infinite"`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Extended {
    Number(f64),
    Text(String),
}

impl Extended {
    fn infinite() -> Self {
        Extended::Text("inf".into())
    }

    fn parse(&self, field: &str) -> Result<Option<f64>, RunError> {
        match self {
            Extended::Number(x) if x.is_infinite() && *x > 0.0 => Ok(None),
            Extended::Number(x) => Ok(Some(*x)),
            Extended::Text(s) => match s.to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "infinite" => Ok(None),
                _ => Err(config_err(field, format!("expected a number or \"inf\", got {s:?}"))),
            },
        }
    }

    fn normalized(&self, field: &str) -> Result<Self, RunError> {
        Ok(match self.parse(field)? {
            Some(x) => Extended::Number(x),
            None => Extended::infinite(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    Many(Vec<Extended>),
    One(Extended),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsingSection {
    pub h: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XySection {
    pub gamma: Option<f64>,
    pub h: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSection {
    pub lambda: Option<f64>,
}

/// Either explicit hoppings (`J1`, `J1p`, `J3`, `J3p`) or the dimerization
/// form (`delta1`, `delta3`, `alpha`, `beta_c`, `r`); `J2` goes with both.
/// Setting `m` and `q` ties `delta3 = m·delta1 + q` and enables the
/// nearest-dominates validity check.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SshSection {
    #[serde(rename = "J1")]
    pub j1: Option<f64>,
    #[serde(rename = "J1p")]
    pub j1p: Option<f64>,
    #[serde(rename = "J2")]
    pub j2: Option<f64>,
    #[serde(rename = "J3")]
    pub j3: Option<f64>,
    #[serde(rename = "J3p")]
    pub j3p: Option<f64>,
    pub delta1: Option<f64>,
    pub delta3: Option<f64>,
    pub alpha: Option<f64>,
    pub beta_c: Option<f64>,
    pub r: Option<f64>,
    pub m: Option<f64>,
    pub q: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuenchSection {
    /// Model parameter that differs between the two phases.
    pub parameter: Option<String>,
    /// Absolute value in the charging phase.
    pub to: Option<f64>,
    /// Charging-phase value relative to the initial phase.
    pub by: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Momenta on the ring; absent means the thermodynamic limit.
    pub n: Option<usize>,
    pub offset: Option<MomentumOffset>,
    pub panels: Option<usize>,
    pub rel_tol: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalSection {
    pub beta: Option<OneOrMany>,
    pub mu: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TauSection {
    pub values: Option<Vec<f64>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub count: Option<usize>,
    pub spacing: Option<Spacing>,
    /// Charging time used by `sweep` and `kinks`.
    pub at: Option<Extended>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepPhase {
    A,
    B,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Phase whose value of `quench.parameter` is scanned.
    pub over: Option<SweepPhase>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub step: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSection {
    pub sizes: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KinksSection {
    pub threshold: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecurrenceSection {
    pub tau_max: Option<f64>,
    pub dtau: Option<f64>,
    pub window: Option<usize>,
    pub onset_factor: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ising: Option<IsingSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xy: Option<XySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cluster: Option<ClusterSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ssh: Option<SshSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quench: Option<QuenchSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thermal: Option<ThermalSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<TauSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scaling: Option<ScalingSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kinks: Option<KinksSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recurrence: Option<RecurrenceSection>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, RunError> {
        let de = toml::Deserializer::parse(text).map_err(|e| config_err("<toml>", e.to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| config_err(e.path().to_string(), e.inner().to_string()))
    }

    /// Reads the `config` entry of a manifest.
    pub fn from_manifest(text: &str) -> Result<Self, RunError> {
        let mut value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| config_err("<manifest>", e.to_string()))?;
        let config = value.get_mut("config").map(serde_json::Value::take).ok_or_else(|| {
            config_err("config", "manifest has no `config` entry")
        })?;
        serde_path_to_error::deserialize(config).map_err(|e| config_err(e.path().to_string(), e.inner().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_manifest(&text)
        } else {
            Self::from_toml(&text)
        }
    }
}

fn finite(value: f64, field: &str) -> Result<f64, RunError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(config_err(field, format!("must be finite, got {value}")))
    }
}

fn require(value: Option<f64>, field: &str) -> Result<f64, RunError> {
    finite(value.ok_or_else(|| config_err(field, "missing"))?, field)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum SshMode {
    Hoppings,
    Dimerization,
    Line,
}

#[derive(Clone, Debug)]
enum ModelSpec {
    Ising(IsingSection),
    Xy(XySection),
    Cluster(ClusterSection),
    Ssh(SshSection, SshMode),
}

impl ModelSpec {
    fn section(&self) -> &'static str {
        match self {
            ModelSpec::Ising(_) => "ising",
            ModelSpec::Xy(_) => "xy",
            ModelSpec::Cluster(_) => "cluster",
            ModelSpec::Ssh(..) => "ssh",
        }
    }

    fn parameters(&self) -> &'static [&'static str] {
        match self {
            ModelSpec::Ising(_) => &["h"],
            ModelSpec::Xy(_) => &["gamma", "h"],
            ModelSpec::Cluster(_) => &["lambda"],
            ModelSpec::Ssh(_, SshMode::Hoppings) => &["J1", "J1p", "J2", "J3", "J3p"],
            ModelSpec::Ssh(_, SshMode::Dimerization) => &["delta1", "delta3", "J2"],
            ModelSpec::Ssh(_, SshMode::Line) => &["delta1", "J2"],
        }
    }

    fn slot(&mut self, name: &str) -> Option<&mut Option<f64>> {
        Some(match (self, name) {
            (ModelSpec::Ising(s), "h") => &mut s.h,
            (ModelSpec::Xy(s), "gamma") => &mut s.gamma,
            (ModelSpec::Xy(s), "h") => &mut s.h,
            (ModelSpec::Cluster(s), "lambda") => &mut s.lambda,
            (ModelSpec::Ssh(s, _), "J1") => &mut s.j1,
            (ModelSpec::Ssh(s, _), "J1p") => &mut s.j1p,
            (ModelSpec::Ssh(s, _), "J2") => &mut s.j2,
            (ModelSpec::Ssh(s, _), "J3") => &mut s.j3,
            (ModelSpec::Ssh(s, _), "J3p") => &mut s.j3p,
            (ModelSpec::Ssh(s, _), "delta1") => &mut s.delta1,
            (ModelSpec::Ssh(s, _), "delta3") => &mut s.delta3,
            _ => return None,
        })
    }

    fn get(&mut self, name: &str) -> Option<f64> {
        self.slot(name).and_then(|s| *s)
    }

    fn set(&mut self, name: &str, value: f64) {
        if let Some(slot) = self.slot(name) {
            *slot = Some(value);
        }
    }

    fn field(&self, name: &str) -> String {
        format!("{}.{name}", self.section())
    }

    fn build(&self) -> Result<Phase, RunError> {
        Ok(match self {
            ModelSpec::Ising(s) => Phase::Nambu(build_ising(IsingParams { h: require(s.h, "ising.h")? })),
            ModelSpec::Xy(s) => Phase::Nambu(build_xy(XyParams {
                gamma: require(s.gamma, "xy.gamma")?,
                h: require(s.h, "xy.h")?,
            })),
            ModelSpec::Cluster(s) => {
                Phase::Nambu(build_cluster_ising(ClusterIsingParams { lambda: require(s.lambda, "cluster.lambda")? }))
            }
            ModelSpec::Ssh(s, mode) => {
                let j2 = require(s.j2, "ssh.J2")?;
                let hop = match mode {
                    SshMode::Hoppings => SshHoppings {
                        j1: require(s.j1, "ssh.J1")?,
                        j1p: require(s.j1p, "ssh.J1p")?,
                        j2,
                        j3: require(s.j3, "ssh.J3")?,
                        j3p: require(s.j3p, "ssh.J3p")?,
                    },
                    SshMode::Dimerization => SshDimerization {
                        delta1: require(s.delta1, "ssh.delta1")?,
                        delta3: require(s.delta3, "ssh.delta3")?,
                        alpha: require(s.alpha, "ssh.alpha")?,
                        beta_c: require(s.beta_c, "ssh.beta_c")?,
                        r: require(s.r, "ssh.r")?,
                    }
                    .hoppings()
                    .with_j2(j2),
                    SshMode::Line => {
                        let line = SshLineProtocol {
                            delta1_0: require(s.delta1, "ssh.delta1")?,
                            delta1_1: 0.0,
                            m: require(s.m, "ssh.m")?,
                            q: require(s.q, "ssh.q")?,
                            alpha: require(s.alpha, "ssh.alpha")?,
                            beta_c: require(s.beta_c, "ssh.beta_c")?,
                            r: require(s.r, "ssh.r")?,
                        };
                        if line.r == -1.0 {
                            return Err(config_err("ssh.r", "r = -1 closes the gap at k = 0 for every dimerization"));
                        }
                        let hop = line.endpoint(line.delta1_0).hoppings().with_j2(j2);
                        hop.check_nearest_dominates().map_err(|ineq| {
                            config_err("ssh.delta1", format!("delta1 = {} violates {ineq}", line.delta1_0))
                        })?;
                        hop
                    }
                };
                Phase::NumberConserving(build_ssh(hop, MaxNeighbor::Third))
            }
        })
    }
}

enum Phase {
    NumberConserving(crate::spectral::DVectorModel),
    Nambu(crate::spectral::NambuModel),
}

fn quench_of(a: Phase, b: Phase, tau: ChargingTime) -> AnyQuench {
    match (a, b) {
        (Phase::NumberConserving(a), Phase::NumberConserving(b)) => {
            AnyQuench::NumberConserving(QuenchSpec::new(a, b, tau))
        }
        (Phase::Nambu(a), Phase::Nambu(b)) => AnyQuench::Nambu(QuenchSpec::new(a, b, tau)),
        _ => unreachable!("both phases come from one model section"),
    }
}

fn resolve_model(cfg: &mut RunConfig) -> Result<ModelSpec, RunError> {
    let present: Vec<&str> = [
        ("ising", cfg.ising.is_some()),
        ("xy", cfg.xy.is_some()),
        ("cluster", cfg.cluster.is_some()),
        ("ssh", cfg.ssh.is_some()),
    ]
    .into_iter()
    .filter_map(|(n, p)| p.then_some(n))
    .collect();
    match present.as_slice() {
        [] => return Err(config_err("ising|xy|cluster|ssh", "no model section")),
        [_] => {}
        [_, second, ..] => return Err(config_err(*second, format!("only one model section allowed, found {present:?}"))),
    }
    if let Some(s) = &cfg.ising {
        return Ok(ModelSpec::Ising(s.clone()));
    }
    if let Some(s) = &cfg.xy {
        return Ok(ModelSpec::Xy(s.clone()));
    }
    if let Some(s) = &cfg.cluster {
        return Ok(ModelSpec::Cluster(s.clone()));
    }
    let s = cfg.ssh.as_mut().expect("one section present");
    let hop_keys = [("J1", s.j1), ("J1p", s.j1p), ("J3", s.j3), ("J3p", s.j3p)];
    let dim_keys =
        [("delta1", s.delta1), ("delta3", s.delta3), ("alpha", s.alpha), ("beta_c", s.beta_c), ("r", s.r), ("m", s.m), ("q", s.q)];
    let hop = hop_keys.iter().find(|(_, v)| v.is_some()).map(|(n, _)| *n);
    let dim = dim_keys.iter().find(|(_, v)| v.is_some()).map(|(n, _)| *n);
    if let (Some(h), Some(d)) = (hop, dim) {
        return Err(config_err(format!("ssh.{h}"), format!("cannot be combined with ssh.{d}")));
    }
    s.j2.get_or_insert(0.0);
    let mode = if hop.is_some() || dim.is_none() {
        s.j1.get_or_insert(1.0);
        s.j1p.get_or_insert(1.0);
        s.j3.get_or_insert(0.0);
        s.j3p.get_or_insert(0.0);
        SshMode::Hoppings
    } else {
        s.alpha.get_or_insert(1.0);
        s.beta_c.get_or_insert(1.0);
        s.r.get_or_insert(0.0);
        match (s.m, s.q) {
            (None, None) => {
                s.delta3.get_or_insert(0.0);
                SshMode::Dimerization
            }
            (Some(_), Some(_)) => {
                if s.delta3.is_some() {
                    return Err(config_err("ssh.delta3", "is fixed by ssh.m and ssh.q"));
                }
                SshMode::Line
            }
            (Some(_), None) => return Err(config_err("ssh.q", "missing (ssh.m is set)")),
            (None, Some(_)) => return Err(config_err("ssh.m", "missing (ssh.q is set)")),
        }
    };
    Ok(ModelSpec::Ssh(s.clone(), mode))
}

#[derive(Clone, Copy, Debug)]
enum Target {
    To(f64),
    By(f64),
}

#[derive(Clone, Debug)]
struct SweepPlan {
    over: SweepPhase,
    values: Vec<f64>,
}

/// Everything a run needs, resolved and validated.
#[derive(Clone, Debug)]
pub struct Plan {
    /// The input with every default made explicit.
    pub config: RunConfig,
    pub command: Command,
    model: ModelSpec,
    parameter: String,
    target: Target,
    grid: BzGrid,
    thermals: Vec<(String, ThermalSpec)>,
    taus: Vec<f64>,
    tau_at: ChargingTime,
    sweep: Option<SweepPlan>,
    sizes: Vec<usize>,
    kink_threshold: f64,
    recurrence: RecurrenceOptions,
}

fn sweep_values(s: &SweepSection) -> Result<Vec<f64>, RunError> {
    let start = require(s.start, "sweep.start")?;
    let stop = require(s.stop, "sweep.stop")?;
    let step = require(s.step, "sweep.step")?;
    if !(step > 0.0) {
        return Err(config_err("sweep.step", format!("must be positive, got {step}")));
    }
    if stop < start {
        return Err(config_err("sweep.stop", format!("{stop} is below sweep.start = {start}")));
    }
    let intervals = ((stop - start) / step).round();
    if (start + intervals * step - stop).abs() > 1e-9 * step.max(stop.abs()) {
        return Err(config_err("sweep.step", format!("{step} does not divide [{start}, {stop}]")));
    }
    let n = intervals as usize;
    Ok((0..=n).map(|i| if i == n { stop } else { start + i as f64 * step }).collect())
}

fn tau_values(t: &TauSection) -> Result<Vec<f64>, RunError> {
    if let Some(values) = &t.values {
        if t.start.is_some() || t.stop.is_some() || t.count.is_some() {
            return Err(config_err("tau.values", "cannot be combined with tau.start/stop/count"));
        }
        return Ok(values.clone());
    }
    let start = require(t.start, "tau.start")?;
    let stop = require(t.stop, "tau.stop")?;
    let count = t.count.ok_or_else(|| config_err("tau.count", "missing"))?;
    if count == 0 {
        return Err(config_err("tau.count", "must be positive"));
    }
    Ok(match t.spacing.unwrap_or(Spacing::Linear) {
        Spacing::Log => {
            if !(start > 0.0) || !(stop > start) {
                return Err(config_err("tau.start", "log spacing needs 0 < start < stop"));
            }
            log_tau_grid(start, stop, count)
        }
        Spacing::Linear => {
            if count == 1 {
                vec![start]
            } else {
                let h = (stop - start) / (count - 1) as f64;
                (0..count).map(|i| if i + 1 == count { stop } else { start + i as f64 * h }).collect()
            }
        }
    })
}

impl Plan {
    pub fn resolve(input: &RunConfig) -> Result<Self, RunError> {
        let mut cfg = input.clone();
        let command = cfg.command.ok_or_else(|| config_err("command", "missing"))?;
        let mut model = resolve_model(&mut cfg)?;

        let q = cfg.quench.get_or_insert_with(QuenchSection::default);
        let parameter = match (&q.parameter, model.parameters()) {
            (Some(p), allowed) if allowed.contains(&p.as_str()) => p.clone(),
            (Some(p), allowed) => {
                return Err(config_err("quench.parameter", format!("{p:?} is not one of {allowed:?}")));
            }
            (None, [only]) => only.to_string(),
            (None, allowed) => return Err(config_err("quench.parameter", format!("missing; one of {allowed:?}"))),
        };
        q.parameter = Some(parameter.clone());
        let target = match (q.to, q.by) {
            (Some(to), None) => Target::To(finite(to, "quench.to")?),
            (None, Some(by)) => Target::By(finite(by, "quench.by")?),
            (Some(_), Some(_)) => return Err(config_err("quench.by", "cannot be combined with quench.to")),
            (None, None) => return Err(config_err("quench.to", "missing (or give quench.by)")),
        };

        let sweep = match (&mut cfg.sweep, command) {
            (Some(s), _) => {
                let over = *s.over.get_or_insert(SweepPhase::A);
                if over == SweepPhase::B && matches!(target, Target::By(_)) {
                    return Err(config_err("quench.by", "a sweep over phase b sets the charging value directly; use quench.to"));
                }
                Some(SweepPlan { over, values: sweep_values(s)? })
            }
            (None, Command::Sweep | Command::Kinks) => return Err(config_err("sweep.start", "missing [sweep] section")),
            (None, _) => None,
        };
        let swept_a = sweep.as_ref().is_some_and(|s| s.over == SweepPhase::A);
        if !swept_a && model.get(&parameter).is_none() {
            return Err(config_err(model.field(&parameter), "missing"));
        }

        let g = cfg.grid.get_or_insert_with(GridSection::default);
        let grid = match g.n {
            Some(n) => {
                if g.panels.is_some() || g.rel_tol.is_some() {
                    return Err(config_err("grid.panels", "panels and rel_tol apply only without grid.n"));
                }
                BzGrid::finite_with_offset(n, *g.offset.get_or_insert(MomentumOffset::HalfInteger))
            }
            None => {
                if g.offset.is_some() {
                    return Err(config_err("grid.offset", "applies only with grid.n"));
                }
                let BzGrid::ThermodynamicLimit { panels, rel_tol } = BzGrid::thermodynamic() else { unreachable!() };
                BzGrid::ThermodynamicLimit {
                    panels: *g.panels.get_or_insert(panels),
                    rel_tol: *g.rel_tol.get_or_insert(rel_tol),
                }
            }
        };
        if command != Command::Scaling {
            grid.validate().map_err(|e| config_err("grid.n", e.to_string()))?;
        }

        let th = cfg.thermal.get_or_insert_with(ThermalSection::default);
        let mu = finite(*th.mu.get_or_insert(0.0), "thermal.mu")?;
        let betas = match th.beta.take() {
            None => return Err(config_err("thermal.beta", "missing")),
            Some(OneOrMany::One(b)) => vec![b],
            Some(OneOrMany::Many(v)) if v.is_empty() => return Err(config_err("thermal.beta", "empty list")),
            Some(OneOrMany::Many(v)) => v,
        };
        let betas: Vec<Extended> = betas.iter().map(|b| b.normalized("thermal.beta")).collect::<Result<_, _>>()?;
        let mut thermals = Vec::with_capacity(betas.len());
        for b in &betas {
            let beta = match b.parse("thermal.beta")? {
                Some(x) => Beta::Finite(x),
                None => Beta::Infinite,
            };
            let spec = ThermalSpec::new(beta, mu).map_err(|e| config_err("thermal.beta", e.to_string()))?;
            thermals.push((beta.to_string(), spec));
        }
        th.beta = Some(if betas.len() == 1 { OneOrMany::One(betas[0].clone()) } else { OneOrMany::Many(betas) });

        let t = cfg.tau.get_or_insert_with(TauSection::default);
        let taus = match command {
            Command::Curve => tau_values(t)?,
            Command::Power | Command::Scaling => {
                if t.values.is_none() && t.start.is_none() {
                    let d = default_power_tau_grid();
                    t.start = Some(d[0]);
                    t.stop = Some(d[d.len() - 1]);
                    t.count = Some(d.len());
                    t.spacing = Some(Spacing::Log);
                }
                tau_values(t)?
            }
            _ => Vec::new(),
        };
        if t.values.is_none() && t.start.is_some() {
            t.spacing.get_or_insert(Spacing::Linear);
        }
        for &tau in &taus {
            let positive = matches!(command, Command::Power | Command::Scaling);
            if !tau.is_finite() || tau < 0.0 || (positive && tau == 0.0) {
                return Err(config_err("tau.values", format!("charging time {tau} out of range")));
            }
        }
        let tau_at = match command {
            Command::Sweep | Command::Kinks => {
                let at = t.at.get_or_insert_with(Extended::infinite).normalized("tau.at")?;
                t.at = Some(at.clone());
                match at.parse("tau.at")? {
                    None => ChargingTime::Infinite,
                    Some(x) if x >= 0.0 => ChargingTime::Finite(x),
                    Some(x) => return Err(config_err("tau.at", format!("must be non-negative, got {x}"))),
                }
            }
            _ => ChargingTime::Infinite,
        };
        if cfg.tau.as_ref().is_some_and(|t| *t == TauSection::default()) {
            cfg.tau = None;
        }

        let sizes = match command {
            Command::Scaling => {
                let s = cfg.scaling.get_or_insert_with(ScalingSection::default);
                let sizes = s.sizes.clone().ok_or_else(|| config_err("scaling.sizes", "missing"))?;
                if sizes.len() < 4 {
                    return Err(config_err("scaling.sizes", "needs at least 4 sizes"));
                }
                if sizes.contains(&0) {
                    return Err(config_err("scaling.sizes", "sizes must be positive"));
                }
                sizes
            }
            _ => Vec::new(),
        };

        let kink_threshold = match command {
            Command::Kinks => {
                let k = cfg.kinks.get_or_insert_with(KinksSection::default);
                let th = *k.threshold.get_or_insert(DEFAULT_KINK_THRESHOLD);
                if !(th > 0.0) || !th.is_finite() {
                    return Err(config_err("kinks.threshold", "must be positive"));
                }
                th
            }
            _ => DEFAULT_KINK_THRESHOLD,
        };

        let mut recurrence = RecurrenceOptions::default();
        if command == Command::Recurrence {
            if !matches!(grid, BzGrid::FiniteN { .. }) {
                return Err(config_err("grid.n", "recurrence needs a finite ring"));
            }
            let r = cfg.recurrence.get_or_insert_with(RecurrenceSection::default);
            recurrence.tau_max = r.tau_max;
            recurrence.dtau = r.dtau;
            recurrence.window = *r.window.get_or_insert(recurrence.window);
            recurrence.onset_factor = *r.onset_factor.get_or_insert(recurrence.onset_factor);
            for (v, field) in [(r.tau_max, "recurrence.tau_max"), (r.dtau, "recurrence.dtau")] {
                if let Some(v) = v {
                    if !(v > 0.0) || !v.is_finite() {
                        return Err(config_err(field, "must be positive"));
                    }
                }
            }
        }

        // Build both phases once up front so domain errors surface as config errors.
        let plan = Plan {
            config: cfg,
            command,
            model: model.clone(),
            parameter,
            target,
            grid,
            thermals,
            taus,
            tau_at,
            sweep,
            sizes,
            kink_threshold,
            recurrence,
        };
        match &plan.sweep {
            Some(s) => {
                plan.quench_at(Some(s.values[0]), ChargingTime::Infinite)?;
                plan.quench_at(s.values.last().copied(), ChargingTime::Infinite)?;
            }
            None => {
                plan.quench_at(None, ChargingTime::Infinite)?;
            }
        }
        Ok(plan)
    }

    /// Quench with the swept parameter at `swept`, or the configured one.
    fn quench_at(&self, swept: Option<f64>, tau: ChargingTime) -> Result<AnyQuench, RunError> {
        let mut a = self.model.clone();
        let over = self.sweep.as_ref().map(|s| s.over).filter(|_| swept.is_some());
        if let (Some(SweepPhase::A), Some(v)) = (over, swept) {
            a.set(&self.parameter, v);
        }
        let a_value = a.get(&self.parameter).expect("resolved");
        let b_value = match (over, swept, self.target) {
            (Some(SweepPhase::B), Some(v), _) => v,
            (_, _, Target::To(v)) => v,
            (_, _, Target::By(d)) => a_value + d,
        };
        let mut b = a.clone();
        b.set(&self.parameter, b_value);
        Ok(quench_of(a.build()?, b.build()?, tau))
    }

    /// Value written in the `param` column for a run without a sweep.
    fn fixed_param(&self) -> f64 {
        let mut m = self.model.clone();
        let a = m.get(&self.parameter).expect("resolved");
        match self.target {
            Target::To(v) => v,
            Target::By(d) => a + d,
        }
    }

    /// Points of the `param` column paired with the sweep value driving each.
    fn points(&self) -> Vec<(f64, Option<f64>)> {
        match &self.sweep {
            Some(s) => s.values.iter().map(|&v| (v, Some(v))).collect(),
            None => vec![(self.fixed_param(), None)],
        }
    }

    pub fn grid_convention(&self) -> String {
        let base = self.grid.describe();
        match self.command {
            Command::Scaling => format!("{base} (N replaced by each scaling size)"),
            _ => base,
        }
    }
}

/// Shortest representation that parses back to the same `f64`.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn csv(header: &str, rows: impl IntoIterator<Item = (String, String)>) -> String {
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    for (a, b) in rows {
        let _ = writeln!(out, "{a},{b}");
    }
    out
}

/// Result of a completed run.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub outputs: Vec<PathBuf>,
    pub manifest: PathBuf,
}

struct Output {
    name: String,
    body: String,
}

fn file_name(stem: &str, label: &str, multi: bool) -> String {
    if multi {
        format!("{stem}_beta-{label}.csv")
    } else {
        format!("{stem}.csv")
    }
}

fn sweep_meta(plan: &Plan, thermal: &ThermalSpec, tau: &str) -> SweepMeta {
    SweepMeta {
        model: plan.model.section().to_string(),
        thermal: format!("beta={}, mu={}", thermal.beta(), thermal.mu()),
        grid: plan.grid.describe(),
        tau: tau.to_string(),
    }
}

fn numeric(e: RunError) -> crate::Error {
    match e {
        RunError::Numerical(e) => e,
        other => crate::Error::InvalidInput(other.to_string()),
    }
}

/// Runs a resolved plan, returning the files to write and the extra manifest entries.
fn execute(plan: &Plan, engine: &Engine) -> Result<(Vec<Output>, serde_json::Value), RunError> {
    let multi = plan.thermals.len() > 1;
    let mut outputs = Vec::new();
    let mut results = serde_json::Map::new();
    for (label, thermal) in &plan.thermals {
        match plan.command {
            Command::Curve => {
                let q = plan.quench_at(None, ChargingTime::Infinite)?;
                let curve = engine.energy_curve(&q, &plan.taus, &plan.grid, thermal)?;
                let rows = curve.tau.iter().zip(&curve.energy_per_site).map(|(t, e)| (num(*t), num(*e)));
                outputs.push(Output { name: file_name("curve", label, multi), body: csv("tau,energy_per_site", rows) });
            }
            Command::Sweep | Command::Kinks => {
                let s = plan.sweep.as_ref().expect("resolved");
                let tau = plan.tau_at;
                let meta = sweep_meta(plan, thermal, &format!("{tau:?}"));
                let sweep = analysis::sweep_with(engine, &plan.parameter, &s.values, meta, |p| {
                    let q = plan.quench_at(Some(p), tau).map_err(numeric)?;
                    engine.stored_energy(&q, &plan.grid, thermal)
                })?;
                let rows = sweep.grid.iter().zip(&sweep.values).map(|(p, e)| (num(*p), num(*e)));
                outputs.push(Output { name: file_name("sweep", label, multi), body: csv("param,value_per_site", rows) });
                if plan.command == Command::Kinks {
                    let report = analysis::detect_kinks(&sweep, plan.kink_threshold)?;
                    let rows = report.kinks.iter().map(|k| (num(k.parameter), num(k.second_difference)));
                    outputs.push(Output {
                        name: file_name("kinks", label, multi),
                        body: csv("param,second_difference", rows),
                    });
                    results.insert(format!("kinks_beta_{label}"), serde_json::to_value(&report).expect("plain data"));
                }
            }
            Command::Power => {
                let points = plan.points();
                let powers = analysis::map_points(engine, &points, |&(_, swept)| {
                    let q = plan.quench_at(swept, ChargingTime::Infinite).map_err(numeric)?;
                    engine.max_power(&q, &plan.taus, &plan.grid, thermal)
                })?;
                let rows = points.iter().zip(&powers).map(|((p, _), m)| (num(*p), num(m.power_per_site)));
                outputs.push(Output { name: file_name("power", label, multi), body: csv("param,value_per_site", rows) });
                let taus_at_max: Vec<f64> = powers.iter().map(|p| p.tau).collect();
                results.insert(format!("tau_at_max_beta_{label}"), json!(taus_at_max));
            }
            Command::Scaling => {
                let q = plan.quench_at(None, ChargingTime::Infinite)?;
                let fit = analysis::power_scaling(engine, &q, &plan.sizes, &plan.taus, thermal)?;
                let rows = fit.points.iter().map(|(n, p)| (n.to_string(), num(*p)));
                outputs.push(Output { name: file_name("scaling", label, multi), body: csv("N,p_max", rows) });
                results.insert(
                    format!("fit_beta_{label}"),
                    json!({ "slope": fit.slope, "intercept": fit.intercept, "r_squared": fit.r_squared }),
                );
            }
            Command::Recurrence => {
                let n = plan.grid.size().expect("finite ring checked");
                let points = plan.points();
                let reports = analysis::map_points(engine, &points, |&(_, swept)| {
                    let q = plan.quench_at(swept, ChargingTime::Infinite).map_err(numeric)?;
                    let report = analysis::recurrence_profile(engine, &q, n, thermal, &plan.recurrence)?;
                    let capacity = engine.capacity_per_site(&q, &plan.grid)?;
                    Ok((report, capacity))
                })?;
                let rows = points.iter().zip(&reports).map(|((p, _), (r, _))| (num(*p), num(r.e_max)));
                outputs.push(Output {
                    name: file_name("recurrence", label, multi),
                    body: csv("param,value_per_site", rows),
                });
                let detail: Vec<serde_json::Value> = points
                    .iter()
                    .zip(&reports)
                    .map(|((p, _), (r, cap))| {
                        json!({
                            "param": p,
                            "e_max": r.e_max,
                            "percent_of_capacity": 100.0 * r.e_max / cap,
                            "plateau": [r.plateau_start, r.plateau_end],
                            "plateau_mean": r.plateau_mean,
                            "onset": r.onset,
                        })
                    })
                    .collect();
                results.insert(format!("recurrence_beta_{label}"), json!(detail));
            }
        }
    }
    Ok((outputs, serde_json::Value::Object(results)))
}

/// Executes `args`, writing CSV files and the manifest into the output directory.
pub fn run(args: &Args) -> Result<RunSummary, RunError> {
    let started = Instant::now();
    let config = RunConfig::load(&args.config)?;
    let plan = Plan::resolve(&config)?;
    let engine = match args.workers {
        Some(0) => return Err(config_err("--workers", "must be positive")),
        Some(n) => Engine::with_workers(n)?,
        None => Engine::new(),
    };
    let out_dir = args
        .out
        .clone()
        .or_else(|| plan.config.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let (outputs, results) = execute(&plan, &engine)?;
    fs::create_dir_all(&out_dir).map_err(io_err(&out_dir))?;
    let mut written = Vec::with_capacity(outputs.len());
    for o in &outputs {
        let path = out_dir.join(&o.name);
        fs::write(&path, &o.body).map_err(io_err(&path))?;
        written.push(path);
    }
    let manifest = json!({
        "tool": "quenchbat",
        "version": env!("CARGO_PKG_VERSION"),
        "config_dialect": CONFIG_DIALECT,
        "config": plan.config,
        "grid_convention": plan.grid_convention(),
        "energy_normalization": "per momentum (per unit cell)",
        "workers": engine.workers(),
        "seed": args.seed,
        "outputs": outputs.iter().map(|o| o.name.as_str()).collect::<Vec<_>>(),
        "results": results,
        "wall_time_seconds": started.elapsed().as_secs_f64(),
    });
    let manifest_path = out_dir.join(MANIFEST_NAME);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest is plain data");
    fs::write(&manifest_path, text + "\n").map_err(io_err(&manifest_path))?;
    Ok(RunSummary { outputs: written, manifest: manifest_path })
}

/// Entry point shared by the binary: runs and maps the outcome to an exit code.
pub fn main_with(args: Args) -> i32 {
    match run(&args) {
        Ok(summary) => {
            for p in &summary.outputs {
                println!("{}", p.display());
            }
            println!("{}", summary.manifest.display());
            0
        }
        Err(e) => {
            eprintln!("quenchbat: {e}");
            e.exit_code()
        }
    }
}
