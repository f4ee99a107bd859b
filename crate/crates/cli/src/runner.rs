//! Trajectory orchestration and on-disk artifacts.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use spinmagic::analysis::{
    self, average_realizations, default_fit_window, fit_power_law, magnetization_profile, observable,
    polarization_transfer, FitResult, TimeSeriesRecord,
};
use spinmagic::exact::{densify, participation_entropy_exact, sre_exact};
use spinmagic::sampling::{estimate_pe, estimate_sre};
use spinmagic::{
    domain_wall_state, evolve, participation_entropy, stabilizer_renyi_entropy, MatrixProductState, TruncationSpec,
};

use crate::config::{Method, SimulationConfig};
use crate::error::{io_err, CliError, Result};

pub const RECORDS_FILE: &str = "records.csv";
pub const FITS_FILE: &str = "fits.json";
pub const MANIFEST_FILE: &str = "manifest.json";
const PARTS_DIR: &str = "parts";

pub const RECORDS_FORMAT: u32 = 1;
pub const FITS_FORMAT: u32 = 1;
pub const MANIFEST_FORMAT: u32 = 1;
pub const CHECKPOINT_FORMAT: u32 = 1;

pub const OUTPUT_DIR_ENV: &str = "SPINMAGIC_OUTPUT_DIR";
pub const THREADS_ENV: &str = "SPINMAGIC_THREADS";

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub output_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    /// Execution order of realizations; results do not depend on it.
    pub order: Option<Vec<usize>>,
    /// Fail every trajectory after this many measurements. Exercises the
    /// partial-output path.
    pub abort_after: Option<usize>,
}

impl RunOptions {
    pub fn from_env() -> Result<Self> {
        let output_dir = std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from);
        let threads = match std::env::var(THREADS_ENV) {
            Ok(s) => Some(s.trim().parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(|| {
                CliError::Config(vec![format!("{THREADS_ENV}={s:?} is not a positive integer")])
            })?),
            Err(_) => None,
        };
        Ok(Self {
            output_dir,
            threads,
            order: None,
            abort_after: None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub realization: usize,
    pub disorder_seed: u64,
    pub disorder_stream: u64,
    pub fields: Vec<f64>,
    pub status: RunStatus,
    pub final_time: f64,
    pub steps: usize,
    pub max_bond: usize,
    pub cumulative_discarded: f64,
    pub truncation_alarm: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Complete,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormatVersions {
    pub records: u32,
    pub fits: u32,
    pub manifest: u32,
    pub checkpoint: u32,
}

impl Default for FormatVersions {
    fn default() -> Self {
        Self {
            records: RECORDS_FORMAT,
            fits: FITS_FORMAT,
            manifest: MANIFEST_FORMAT,
            checkpoint: CHECKPOINT_FORMAT,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub formats: FormatVersions,
    pub code_version: String,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub config: SimulationConfig,
    pub trajectories: Vec<TrajectorySummary>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let m: Manifest = serde_json::from_str(&text)?;
        if m.formats.manifest != MANIFEST_FORMAT {
            return Err(CliError::Config(vec![format!(
                "{}: manifest format {} is not supported (expected {MANIFEST_FORMAT})",
                path.display(),
                m.formats.manifest
            )]));
        }
        m.config.validate()?;
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitEntry {
    pub observable: String,
    pub index: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Everything a run produced, in memory.
#[derive(Debug)]
pub struct Simulation {
    pub records: Vec<TimeSeriesRecord>,
    pub trajectories: Vec<TrajectorySummary>,
    pub failure: Option<CliError>,
}

struct TrajectoryOutput {
    records: Vec<TimeSeriesRecord>,
    summary: TrajectorySummary,
    state: Option<MatrixProductState>,
    error: Option<spinmagic::Error>,
}

/// Deterministic per-measurement seed for the sampling estimators.
fn mix(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x243f_6a88_85a3_08d3;
    for &p in parts {
        h ^= p;
        h = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
        h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h ^= h >> 31;
    }
    h
}

struct Measurer<'a> {
    cfg: &'a SimulationConfig,
    realization: Option<usize>,
    profile_0: Vec<f64>,
    units: f64,
}

impl Measurer<'_> {
    fn base(&self, time: f64, observable: &str, index: Option<i64>) -> TimeSeriesRecord {
        TimeSeriesRecord {
            time,
            observable: observable.to_string(),
            index,
            len: self.cfg.model.len,
            jz: self.cfg.model.jz,
            h: self.cfg.model.disorder.h,
            realization: self.realization,
            chi: Some(self.cfg.truncation.chi),
            chi_replica: None,
            value: 0.0,
            stderr: None,
            discarded_weight: None,
        }
    }

    fn replica_spec(&self, chi: Option<usize>) -> spinmagic::Result<TruncationSpec> {
        TruncationSpec::new(chi.unwrap_or(self.cfg.default_replica_chi()), self.cfg.truncation.replica_cutoff)
    }

    fn measure(
        &self,
        step: usize,
        time: f64,
        m: &MatrixProductState,
        evolution_discarded: f64,
    ) -> spinmagic::Result<Vec<TimeSeriesRecord>> {
        let cfg = self.cfg;
        let len = cfg.model.len;
        let mut out = Vec::new();
        let evo_w = Some(evolution_discarded.min(1.0));
        if cfg.observables.profile || cfg.observables.delta_p {
            let profile = magnetization_profile(m)?;
            if cfg.observables.profile {
                for (i, &z) in profile.iter().enumerate() {
                    out.push(TimeSeriesRecord {
                        value: z,
                        discarded_weight: evo_w,
                        ..self.base(time, observable::Z, Some(i as i64))
                    });
                }
            }
            if cfg.observables.delta_p {
                out.push(TimeSeriesRecord {
                    value: polarization_transfer(&profile, &self.profile_0)?,
                    discarded_weight: evo_w,
                    ..self.base(time, observable::DELTA_P, None)
                });
            }
        }
        if cfg.observables.entanglement {
            out.push(TimeSeriesRecord {
                value: m.entanglement_entropy(len / 2)? * self.units,
                discarded_weight: evo_w,
                ..self.base(time, observable::EE, Some((len / 2) as i64))
            });
        }
        let needs_dense =
            cfg.pe.iter().any(|p| p.method == Method::Exact) || cfg.sre.iter().any(|p| p.method == Method::Exact);
        let dense = if needs_dense {
            Some(densify(m)?)
        } else {
            None
        };
        let realization = self.realization.map_or(0, |r| r as u64 + 1);
        for (i, plan) in cfg.pe.iter().enumerate() {
            let idx = Some(plan.k as i64);
            let rec = match plan.method {
                Method::Replica => {
                    let spec = self.replica_spec(plan.chi)?;
                    let (value, diag) = participation_entropy(m, plan.k, &spec)?;
                    TimeSeriesRecord {
                        chi_replica: Some(spec.max_rank),
                        value: value * self.units,
                        discarded_weight: Some(diag.total_discarded().min(1.0)),
                        ..self.base(time, observable::PE, idx)
                    }
                }
                Method::Exact => {
                    let v = dense.as_ref().expect("dense state computed for exact plans");
                    TimeSeriesRecord {
                        value: participation_entropy_exact(v, plan.k as f64)? * self.units,
                        ..self.base(time, observable::PE_EXACT, idx)
                    }
                }
                Method::Sampling => {
                    let seed = mix(&[cfg.seed, realization, step as u64, 0, i as u64]);
                    let samples = plan.samples.unwrap_or(2);
                    let batch = estimate_pe(m, plan.k, samples, seed)?;
                    TimeSeriesRecord {
                        value: batch.estimator_value * self.units,
                        stderr: Some(batch.standard_error * self.units),
                        ..self.base(time, observable::PE_SAMPLING, idx)
                    }
                }
            };
            out.push(rec);
        }
        for (i, plan) in cfg.sre.iter().enumerate() {
            let idx = Some(plan.n as i64);
            let rec = match plan.method {
                Method::Replica => {
                    let spec = self.replica_spec(plan.chi)?;
                    let (value, diag) = stabilizer_renyi_entropy(m, plan.n, &spec)?;
                    TimeSeriesRecord {
                        chi_replica: Some(spec.max_rank),
                        value: value * self.units,
                        discarded_weight: Some(diag.total_discarded().min(1.0)),
                        ..self.base(time, observable::SRE, idx)
                    }
                }
                Method::Exact => {
                    let v = dense.as_ref().expect("dense state computed for exact plans");
                    TimeSeriesRecord {
                        value: sre_exact(v, plan.n as f64)? * self.units,
                        ..self.base(time, observable::SRE_EXACT, idx)
                    }
                }
                Method::Sampling => {
                    let spec = self.replica_spec(plan.chi)?;
                    let seed = mix(&[cfg.seed, realization, step as u64, 1, i as u64]);
                    let samples = plan.samples.unwrap_or(2);
                    let batch = estimate_sre(m, plan.n, samples, &spec, seed)?;
                    TimeSeriesRecord {
                        chi_replica: Some(spec.max_rank),
                        value: batch.estimator_value * self.units,
                        stderr: Some(batch.standard_error * self.units),
                        ..self.base(time, observable::SRE_SAMPLING, idx)
                    }
                }
            };
            out.push(rec);
        }
        Ok(out)
    }
}

fn run_trajectory(
    cfg: &SimulationConfig,
    realization: usize,
    parts: Option<&Path>,
    abort_after: Option<usize>,
) -> TrajectoryOutput {
    let disorder = cfg.disorder();
    let mut summary = TrajectorySummary {
        realization,
        disorder_seed: disorder.seed,
        disorder_stream: realization as u64,
        fields: disorder.fields(cfg.model.len, realization),
        status: RunStatus::Running,
        final_time: 0.0,
        steps: 0,
        max_bond: 1,
        cumulative_discarded: 0.0,
        truncation_alarm: false,
        checkpoint: None,
    };
    let mut records = Vec::new();
    let result = trajectory_body(cfg, realization, parts, abort_after, &mut records, &mut summary);
    let (state, error) = match result {
        Ok(s) => {
            summary.status = RunStatus::Complete;
            (Some(s), None)
        }
        Err(e) => {
            log::error!("realization {realization} failed: {e}");
            summary.status = RunStatus::Failed;
            (None, Some(e))
        }
    };
    TrajectoryOutput {
        records,
        summary,
        state,
        error,
    }
}

fn trajectory_body(
    cfg: &SimulationConfig,
    realization: usize,
    parts: Option<&Path>,
    abort_after: Option<usize>,
    records: &mut Vec<TimeSeriesRecord>,
    summary: &mut TrajectorySummary,
) -> spinmagic::Result<MatrixProductState> {
    let model = cfg.xxz_model(realization)?;
    let initial = domain_wall_state(cfg.model.len)?;
    let measurer = Measurer {
        cfg,
        realization: cfg.is_disordered().then_some(realization),
        profile_0: magnetization_profile(&initial)?,
        units: cfg.output.entropy_units.scale(),
    };
    let mut part = match parts {
        Some(dir) => {
            let f = File::create(dir.join(format!("r{realization:04}.csv")))?;
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(f));
            w.write_record(analysis::RECORD_HEADER)?;
            Some(w)
        }
        None => None,
    };
    let spec = cfg.evolution_spec()?;
    let schedule = cfg.trotter_schedule();
    let mut measured = 0usize;
    let final_state = evolve(&initial, &model, &schedule, &spec, |time, m, diag| {
        if abort_after.is_some_and(|n| measured >= n) {
            return Err(spinmagic::Error::Invariant(format!("run aborted after {measured} measurements")));
        }
        measured += 1;
        let rows = measurer.measure(diag.step, time, m, diag.cumulative_discarded)?;
        if let Some(w) = part.as_mut() {
            for r in &rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        records.extend(rows);
        if diag.truncation_alarm && !summary.truncation_alarm {
            log::warn!(
                "realization {realization}: cumulative discarded weight {:.3e} at t = {time:.3}",
                diag.cumulative_discarded
            );
        }
        summary.final_time = time;
        summary.steps = diag.step;
        summary.max_bond = summary.max_bond.max(diag.max_bond);
        summary.cumulative_discarded = diag.cumulative_discarded;
        summary.truncation_alarm |= diag.truncation_alarm;
        log::info!(
            "realization {realization}: t = {time:.3} bond {} discarded {:.2e}",
            diag.max_bond,
            diag.cumulative_discarded
        );
        Ok(())
    })?;
    Ok(final_state)
}

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n);
    }
    b.build()
        .map_err(|e| CliError::Config(vec![format!("cannot start thread pool: {e}")]))
}

/// Runs every trajectory and merges rows in realization order.
fn simulate_inner(
    cfg: &SimulationConfig,
    opts: &RunOptions,
    parts: Option<&Path>,
) -> Result<(Simulation, Vec<Option<MatrixProductState>>)> {
    cfg.validate()?;
    let n = cfg.model.disorder.realizations;
    let order: Vec<usize> = match &opts.order {
        Some(o) => {
            let set: BTreeSet<usize> = o.iter().copied().collect();
            if o.len() != n || set.len() != n || set.iter().any(|&r| r >= n) {
                return Err(CliError::Config(vec![format!(
                    "execution order must be a permutation of 0..{n}"
                )]));
            }
            o.clone()
        }
        None => (0..n).collect(),
    };
    let pool = thread_pool(opts.threads)?;
    let mut outs: Vec<TrajectoryOutput> =
        pool.install(|| order.par_iter().map(|&r| run_trajectory(cfg, r, parts, opts.abort_after)).collect());
    outs.sort_by_key(|o| o.summary.realization);

    let mut failure = None;
    let mut records = Vec::new();
    let mut trajectories = Vec::new();
    let mut states = Vec::new();
    for o in outs {
        if failure.is_none() {
            if let Some(e) = o.error {
                failure = Some(CliError::Trajectory {
                    realization: o.summary.realization,
                    source: e,
                });
            }
        }
        records.extend(o.records);
        trajectories.push(o.summary);
        states.push(o.state);
    }
    if cfg.is_disordered() {
        let averaged = average_realizations(&records);
        records.extend(averaged);
    }
    Ok((
        Simulation {
            records,
            trajectories,
            failure,
        },
        states,
    ))
}

/// In-memory run with no files written.
pub fn simulate(cfg: &SimulationConfig, opts: &RunOptions) -> Result<Simulation> {
    Ok(simulate_inner(cfg, opts, None)?.0)
}

/// Power-law fits of every ensemble-level series except the site profile.
pub fn fit_all(cfg: &SimulationConfig, records: &[TimeSeriesRecord]) -> Vec<FitEntry> {
    let keys: BTreeSet<(String, Option<i64>)> = records
        .iter()
        .filter(|r| r.realization.is_none() && r.observable != observable::Z)
        .map(|r| (r.observable.clone(), r.index))
        .collect();
    keys.into_iter()
        .map(|(obs, index)| {
            let s = analysis::series(records, &obs, index);
            let window = match cfg.fit.t_max {
                Some(t) => Some((cfg.fit.t_min, t)),
                None => default_fit_window(&s, cfg.fit.t_min),
            };
            let result = match window {
                Some(w) => fit_power_law(&s, w).map_err(|e| e.to_string()),
                None => Err(format!("no usable fit window with t >= {}", cfg.fit.t_min)),
            };
            FitEntry {
                observable: obs,
                index,
                fit: result.as_ref().ok().cloned(),
                error: result.err(),
            }
        })
        .collect()
}

#[derive(Debug)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub records: Vec<TimeSeriesRecord>,
    pub fits: Vec<FitEntry>,
    pub manifest: Manifest,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn code_version() -> String {
    format!("spinmagic {}", env!("CARGO_PKG_VERSION"))
}

/// Runs `cfg` and writes records, fits and manifest into the output directory.
/// A failed trajectory still leaves its partial rows and a failed manifest.
pub fn run(cfg: &SimulationConfig, opts: &RunOptions) -> Result<RunOutput> {
    cfg.validate()?;
    let dir = opts.output_dir.clone().unwrap_or_else(|| cfg.output.dir.clone());
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let parts = dir.join(PARTS_DIR);
    fs::create_dir_all(&parts).map_err(io_err(&parts))?;
    let mut manifest = Manifest {
        formats: FormatVersions::default(),
        code_version: code_version(),
        status: RunStatus::Running,
        failure: None,
        config: cfg.clone(),
        trajectories: Vec::new(),
    };
    let manifest_path = dir.join(MANIFEST_FILE);
    write_json(&manifest_path, &manifest)?;

    let (sim, states) = match simulate_inner(cfg, opts, Some(&parts)) {
        Ok(x) => x,
        Err(e) => {
            manifest.status = RunStatus::Failed;
            manifest.failure = Some(e.to_string());
            write_json(&manifest_path, &manifest)?;
            return Err(e);
        }
    };
    let records_path = dir.join(RECORDS_FILE);
    let f = File::create(&records_path).map_err(io_err(&records_path))?;
    analysis::write_records(BufWriter::new(f), &sim.records)?;
    let fits = fit_all(cfg, &sim.records);
    write_json(&dir.join(FITS_FILE), &fits)?;

    let mut trajectories = sim.trajectories;
    if cfg.output.checkpoint {
        for (t, s) in trajectories.iter_mut().zip(&states) {
            if let Some(s) = s {
                let name = format!("state_r{:04}.mps", t.realization);
                let path = dir.join(&name);
                let f = File::create(&path).map_err(io_err(&path))?;
                let mut w = BufWriter::new(f);
                s.write_checkpoint(&mut w)?;
                w.flush().map_err(io_err(&path))?;
                t.checkpoint = Some(name);
            }
        }
    }
    manifest.trajectories = trajectories;
    match &sim.failure {
        None => {
            manifest.status = RunStatus::Complete;
            fs::remove_dir_all(&parts).map_err(io_err(&parts))?;
        }
        Some(e) => {
            manifest.status = RunStatus::Failed;
            manifest.failure = Some(e.to_string());
        }
    }
    write_json(&manifest_path, &manifest)?;
    if let Some(e) = sim.failure {
        return Err(e);
    }
    Ok(RunOutput {
        dir,
        records: sim.records,
        fits,
        manifest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(extra: &str) -> SimulationConfig {
        let text = format!(
            "seed = 3\n[model]\nL = 6\nJz = 1.0\n[schedule]\nt_max = 0.5\nmeasure_every = 5\n[truncation]\nchi = 16\n{extra}"
        );
        SimulationConfig::from_toml_str(&text).unwrap()
    }

    #[test]
    fn mix_is_sensitive_to_every_part() {
        let a = mix(&[1, 2, 3]);
        assert_ne!(a, mix(&[1, 2, 4]));
        assert_ne!(a, mix(&[2, 1, 3]));
        assert_eq!(a, mix(&[1, 2, 3]));
    }

    #[test]
    fn clean_run_rows() {
        let cfg = small("[[pe]]\nk = 2\n[[sre]]\nn = 2\n");
        let sim = simulate(&cfg, &RunOptions::default()).unwrap();
        assert!(sim.failure.is_none());
        let times: BTreeSet<u64> = sim.records.iter().map(|r| r.time.to_bits()).collect();
        assert_eq!(times.len(), 3);
        // 6 profile + delta P + EE + PE + SRE per time
        assert_eq!(sim.records.len(), 3 * 10);
        assert!(sim.records.iter().all(|r| r.realization.is_none()));
        let first: Vec<_> = sim.records.iter().filter(|r| r.time == 0.0).collect();
        for r in first.iter().filter(|r| r.observable != observable::Z) {
            assert!(r.value.abs() < 1e-10, "{} at t=0 is {}", r.observable, r.value);
        }
        let pe = sim.records.iter().find(|r| r.observable == observable::PE).unwrap();
        assert_eq!(pe.chi_replica, Some(256));
        assert_eq!(pe.chi, Some(16));
    }

    #[test]
    fn disordered_run_averages() {
        let cfg = small("[model.disorder]\nh = 0.5\nrealizations = 3\n");
        let sim = simulate(&cfg, &RunOptions::default()).unwrap();
        assert_eq!(sim.trajectories.len(), 3);
        let per: Vec<_> = sim.records.iter().filter(|r| r.realization.is_some()).collect();
        let avg: Vec<_> = sim.records.iter().filter(|r| r.realization.is_none()).collect();
        assert_eq!(per.len(), 3 * avg.len());
        let t = sim.trajectories[1].fields.clone();
        assert!(t.iter().all(|h| h.abs() <= 0.5));
        assert_ne!(t, sim.trajectories[0].fields);
        let dp: Vec<f64> = per
            .iter()
            .filter(|r| r.observable == observable::DELTA_P && r.time > 0.4)
            .map(|r| r.value)
            .collect();
        let mean = dp.iter().sum::<f64>() / 3.0;
        let got = avg
            .iter()
            .find(|r| r.observable == observable::DELTA_P && r.time > 0.4)
            .unwrap()
            .value;
        assert!((mean - got).abs() < 1e-14);
    }

    #[test]
    fn order_permutation_is_checked() {
        let cfg = small("[model.disorder]\nh = 0.5\nrealizations = 2\n");
        let opts = RunOptions {
            order: Some(vec![0, 0]),
            ..Default::default()
        };
        assert!(simulate(&cfg, &opts).is_err());
    }

    #[test]
    fn bits_rescale_entropies_only() {
        let nats = simulate(&small("[[pe]]\nk = 2\n"), &RunOptions::default()).unwrap();
        let bits = simulate(&small("[[pe]]\nk = 2\n[output]\nentropy_units = \"bits\"\n"), &RunOptions::default())
            .unwrap();
        for (a, b) in nats.records.iter().zip(&bits.records) {
            let scale = match a.observable.as_str() {
                observable::PE | observable::EE => std::f64::consts::LN_2,
                _ => 1.0,
            };
            assert!((a.value - b.value * scale).abs() < 1e-12);
        }
    }
}
