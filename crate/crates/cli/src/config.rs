//! Run configuration, parsed from TOML with unknown keys rejected.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use spinmagic::exact::{MAX_DENSE_SITES, MAX_SRE_SITES};
use spinmagic::{DisorderSpec, TrotterSchedule, TruncationSpec, XXZModel};

use crate::error::{CliError, Result};

/// Replica caps default to `min(chi^2, DEFAULT_REPLICA_CAP)`.
pub const DEFAULT_REPLICA_CAP: usize = 1024;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default)]
    pub seed: u64,
    pub model: ModelConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub truncation: TruncationConfig,
    #[serde(default)]
    pub pe: Vec<PePlan>,
    #[serde(default)]
    pub sre: Vec<SrePlan>,
    #[serde(default)]
    pub observables: ObservablesConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(rename = "L")]
    pub len: usize,
    #[serde(rename = "J", default = "one")]
    pub j: f64,
    #[serde(rename = "Jz")]
    pub jz: f64,
    #[serde(default)]
    pub disorder: DisorderConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderConfig {
    #[serde(default)]
    pub h: f64,
    #[serde(default = "one_usize")]
    pub realizations: usize,
}

impl Default for DisorderConfig {
    fn default() -> Self {
        Self { h: 0.0, realizations: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_order")]
    pub order: u8,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_measure_every")]
    pub measure_every: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        let s = TrotterSchedule::default();
        Self {
            dt: s.dt,
            order: s.order,
            t_max: s.t_max,
            measure_every: s.measure_every,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationConfig {
    #[serde(default = "default_chi")]
    pub chi: usize,
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
    /// Weight cutoff for the replica and Pauli compressions. Zero keeps every
    /// nonzero singular value up to the replica bond cap.
    #[serde(default)]
    pub replica_cutoff: f64,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self {
            chi: default_chi(),
            cutoff: default_cutoff(),
            replica_cutoff: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Replica,
    Sampling,
    Exact,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Replica => "replica",
            Method::Sampling => "sampling",
            Method::Exact => "exact",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PePlan {
    #[serde(default = "two")]
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi: Option<usize>,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SrePlan {
    #[serde(default = "two")]
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi: Option<usize>,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservablesConfig {
    #[serde(default = "yes")]
    pub profile: bool,
    #[serde(default = "yes")]
    pub delta_p: bool,
    #[serde(default = "yes")]
    pub entanglement: bool,
}

impl Default for ObservablesConfig {
    fn default() -> Self {
        Self {
            profile: true,
            delta_p: true,
            entanglement: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    #[serde(default = "default_fit_t_min")]
    pub t_min: f64,
    /// Upper end of the window; detected from the data when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            t_min: default_fit_t_min(),
            t_max: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntropyUnits {
    Nats,
    Bits,
}

impl EntropyUnits {
    pub fn scale(self) -> f64 {
        match self {
            EntropyUnits::Nats => 1.0,
            EntropyUnits::Bits => 1.0 / std::f64::consts::LN_2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_units")]
    pub entropy_units: EntropyUnits,
    /// Also write the final state of every trajectory as a binary checkpoint.
    #[serde(default)]
    pub checkpoint: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            entropy_units: default_units(),
            checkpoint: false,
        }
    }
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn two() -> usize {
    2
}
fn yes() -> bool {
    true
}
fn default_dt() -> f64 {
    TrotterSchedule::default().dt
}
fn default_order() -> u8 {
    TrotterSchedule::default().order
}
fn default_t_max() -> f64 {
    TrotterSchedule::default().t_max
}
fn default_measure_every() -> usize {
    TrotterSchedule::default().measure_every
}
fn default_chi() -> usize {
    256
}
fn default_cutoff() -> f64 {
    1e-12
}
fn default_method() -> Method {
    Method::Replica
}
fn default_fit_t_min() -> f64 {
    2.0
}
fn default_dir() -> PathBuf {
    PathBuf::from("output")
}
fn default_units() -> EntropyUnits {
    EntropyUnits::Nats
}

/// Location of a key inside the config, used to attach line numbers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct KeyPath {
    table: String,
    item: Option<usize>,
    key: Option<String>,
}

impl KeyPath {
    fn new(table: &str, item: Option<usize>, key: Option<&str>) -> Self {
        Self {
            table: table.to_string(),
            item,
            key: key.map(str::to_string),
        }
    }
}

impl fmt::Display for KeyPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.table)?;
        if let Some(i) = self.item {
            write!(f, "[{i}]")?;
        }
        if let Some(k) = &self.key {
            if !self.table.is_empty() {
                f.write_str(".")?;
            }
            f.write_str(k)?;
        }
        Ok(())
    }
}

fn header_name(line: &str) -> Option<(String, bool)> {
    let t = line.trim();
    let t = t.split('#').next().unwrap_or("").trim();
    if let Some(inner) = t.strip_prefix("[[").and_then(|s| s.strip_suffix("]]")) {
        return Some((inner.trim().to_string(), true));
    }
    if let Some(inner) = t.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
        return Some((inner.trim().to_string(), false));
    }
    None
}

fn defines_key(line: &str, key: &str) -> bool {
    let t = line.trim_start();
    let rest = match t.strip_prefix(key) {
        Some(r) => r,
        None => return false,
    };
    let rest = rest.trim_start();
    rest.starts_with('=') || rest.starts_with('.')
}

/// 1-based line of `path` in `text`, falling back to the enclosing header.
pub(crate) fn locate(text: &str, path: &KeyPath) -> Option<usize> {
    let lines: Vec<&str> = text.lines().collect();
    let mut start = None;
    if path.table.is_empty() {
        start = Some(0);
    } else {
        let mut seen = 0usize;
        for (i, l) in lines.iter().enumerate() {
            if let Some((name, array)) = header_name(l) {
                if name != path.table {
                    continue;
                }
                match path.item {
                    Some(n) if array => {
                        if seen == n {
                            start = Some(i);
                            break;
                        }
                        seen += 1;
                    }
                    None if !array => {
                        start = Some(i);
                        break;
                    }
                    _ => {}
                }
            }
        }
    }
    let start = match start {
        Some(s) => s,
        None => {
            // Dotted or inline form, e.g. `disorder = { h = 0.1 }` under [model].
            let (parent, leaf) = path.table.rsplit_once('.')?;
            let parent = locate(text, &KeyPath::new(parent, None, Some(leaf)))?;
            return Some(parent);
        }
    };
    let first = if path.table.is_empty() { start } else { start + 1 };
    if let Some(key) = &path.key {
        for (i, l) in lines.iter().enumerate().skip(first) {
            if header_name(l).is_some() {
                break;
            }
            if defines_key(l, key) {
                return Some(i + 1);
            }
        }
    }
    if path.table.is_empty() {
        None
    } else {
        Some(start + 1)
    }
}

struct Problems<'a> {
    text: Option<&'a str>,
    found: Vec<String>,
}

impl Problems<'_> {
    fn push(&mut self, path: KeyPath, message: impl fmt::Display) {
        let line = self.text.and_then(|t| locate(t, &path));
        self.found.push(match line {
            Some(l) => format!("line {l}: {path}: {message}"),
            None => format!("{path}: {message}"),
        });
    }
}

impl SimulationConfig {
    /// Parses and validates; all errors carry line numbers where possible.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SimulationConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            let msg = e.message().trim().to_string();
            CliError::Config(match line {
                Some(l) => vec![format!("line {l}: {msg}")],
                None => vec![msg],
            })
        })?;
        cfg.check(Some(text))?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::Config(vec![e.to_string()]))
    }

    pub fn validate(&self) -> Result<()> {
        self.check(None)
    }

    fn check(&self, text: Option<&str>) -> Result<()> {
        let mut p = Problems { text, found: Vec::new() };
        let m = &self.model;
        let model = |k: &str| KeyPath::new("model", None, Some(k));
        if m.len < 2 || m.len % 2 != 0 {
            p.push(model("L"), format!("chain length {} must be even and at least 2", m.len));
        }
        if !m.j.is_finite() {
            p.push(model("J"), "coupling must be finite");
        }
        if !m.jz.is_finite() {
            p.push(model("Jz"), "anisotropy must be finite");
        }
        let dis = |k: &str| KeyPath::new("model.disorder", None, Some(k));
        if !(m.disorder.h >= 0.0) || !m.disorder.h.is_finite() {
            p.push(dis("h"), format!("disorder strength {} must be non-negative", m.disorder.h));
        }
        if m.disorder.realizations == 0 {
            p.push(dis("realizations"), "need at least one realization");
        }
        if m.disorder.h == 0.0 && m.disorder.realizations > 1 {
            p.push(dis("realizations"), "several realizations without disorder are identical");
        }

        let s = &self.schedule;
        let sched = |k: &str| KeyPath::new("schedule", None, Some(k));
        if !(s.dt > 0.0) || !s.dt.is_finite() {
            p.push(sched("dt"), format!("time step {} must be positive", s.dt));
        } else if !(s.t_max >= s.dt) || !s.t_max.is_finite() {
            p.push(sched("t_max"), format!("t_max {} must be at least dt", s.t_max));
        }
        if s.order != 1 && s.order != 2 {
            p.push(sched("order"), format!("Trotter order {} must be 1 or 2", s.order));
        }
        if s.measure_every == 0 {
            p.push(sched("measure_every"), "must be positive");
        }

        let tr = |k: &str| KeyPath::new("truncation", None, Some(k));
        if self.truncation.chi == 0 {
            p.push(tr("chi"), "bond dimension must be positive");
        }
        if !(self.truncation.cutoff >= 0.0) || !(self.truncation.cutoff < 1.0) {
            p.push(tr("cutoff"), "weight cutoff must lie in [0, 1)");
        }
        if !(self.truncation.replica_cutoff >= 0.0) || !(self.truncation.replica_cutoff < 1.0) {
            p.push(tr("replica_cutoff"), "weight cutoff must lie in [0, 1)");
        }

        for (i, plan) in self.pe.iter().enumerate() {
            let at = |k: &str| KeyPath::new("pe", Some(i), Some(k));
            check_plan(&mut p, &at, "k", plan.k, plan.method, plan.chi, plan.samples);
            if plan.method == Method::Exact && m.len > MAX_DENSE_SITES {
                p.push(
                    at("method"),
                    format!("exact participation entropy needs L <= {MAX_DENSE_SITES}, got {}", m.len),
                );
            }
        }
        for (i, plan) in self.sre.iter().enumerate() {
            let at = |k: &str| KeyPath::new("sre", Some(i), Some(k));
            check_plan(&mut p, &at, "n", plan.n, plan.method, plan.chi, plan.samples);
            if plan.method == Method::Exact && m.len > MAX_SRE_SITES {
                p.push(
                    at("method"),
                    format!("exact stabilizer entropy needs L <= {MAX_SRE_SITES}, got {}", m.len),
                );
            }
        }

        let fit = |k: &str| KeyPath::new("fit", None, Some(k));
        if !(self.fit.t_min >= 0.0) || !self.fit.t_min.is_finite() {
            p.push(fit("t_min"), "must be non-negative");
        }
        if let Some(t) = self.fit.t_max {
            if !(t > self.fit.t_min) {
                p.push(fit("t_max"), format!("window end {t} must exceed t_min {}", self.fit.t_min));
            }
        }
        if self.output.dir.as_os_str().is_empty() {
            p.push(KeyPath::new("output", None, Some("dir")), "must not be empty");
        }

        if p.found.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(p.found))
        }
    }

    pub fn xxz_model(&self, realization: usize) -> spinmagic::Result<XXZModel> {
        let fields = self.disorder().fields(self.model.len, realization);
        XXZModel::new(self.model.len, self.model.j, self.model.jz, fields)
    }

    pub fn disorder(&self) -> DisorderSpec {
        DisorderSpec {
            strength: self.model.disorder.h,
            realizations: self.model.disorder.realizations,
            seed: self.seed,
        }
    }

    pub fn is_disordered(&self) -> bool {
        self.model.disorder.h > 0.0
    }

    pub fn trotter_schedule(&self) -> TrotterSchedule {
        TrotterSchedule {
            dt: self.schedule.dt,
            order: self.schedule.order,
            t_max: self.schedule.t_max,
            measure_every: self.schedule.measure_every,
        }
    }

    pub fn evolution_spec(&self) -> spinmagic::Result<TruncationSpec> {
        TruncationSpec::new(self.truncation.chi, self.truncation.cutoff)
    }

    /// Replica cap used when a plan leaves `chi` unset.
    pub fn default_replica_chi(&self) -> usize {
        self.truncation.chi.saturating_mul(self.truncation.chi).min(DEFAULT_REPLICA_CAP)
    }
}

fn check_plan(
    p: &mut Problems<'_>,
    at: &dyn Fn(&str) -> KeyPath,
    index_key: &str,
    index: usize,
    method: Method,
    chi: Option<usize>,
    samples: Option<usize>,
) {
    let min_index = if method == Method::Replica { 2 } else { 1 };
    if index < min_index {
        p.push(at(index_key), format!("index {index} must be at least {min_index} for the {method} method"));
    }
    if chi == Some(0) {
        p.push(at("chi"), "bond dimension must be positive");
    }
    match method {
        Method::Sampling => match samples {
            None => p.push(at("samples"), "sampling plans need a sample count"),
            Some(n) if n < 2 => p.push(at("samples"), "need at least 2 samples"),
            _ => {}
        },
        _ => {
            if samples.is_some() {
                p.push(at("samples"), format!("not used by the {method} method"));
            }
        }
    }
    if method == Method::Exact && chi.is_some() {
        p.push(at("chi"), "not used by the exact method");
    }
}
