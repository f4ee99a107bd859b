//! Transport observables, power-law fits, measurement records and the
//! inequality checks relating participation and stabilizer entropies.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exact::{l1_coherence, participation_entropy_exact, qubits, sre_exact, stabilizer_norm};
use crate::mps::MatrixProductState;
use crate::tensor::{C64, ONE, ZERO};

pub mod observable {
    pub const PE: &str = "PE";
    pub const PE_SAMPLING: &str = "PE_sampling";
    pub const PE_EXACT: &str = "PE_exact";
    pub const SRE: &str = "SRE";
    pub const SRE_SAMPLING: &str = "SRE_sampling";
    pub const SRE_EXACT: &str = "SRE_exact";
    pub const Z: &str = "Z";
    pub const DELTA_P: &str = "DeltaP";
    pub const EE: &str = "EE";
}

pub const RECORD_HEADER: [&str; 12] = [
    "time",
    "observable",
    "index",
    "L",
    "Jz",
    "h",
    "realization",
    "chi",
    "chi_replica",
    "value",
    "stderr",
    "discarded_weight",
];

/// One measurement row of `records.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesRecord {
    pub time: f64,
    pub observable: String,
    /// Renyi index, or site index for profiles.
    pub index: Option<i64>,
    #[serde(rename = "L")]
    pub len: usize,
    #[serde(rename = "Jz")]
    pub jz: f64,
    pub h: f64,
    pub realization: Option<usize>,
    pub chi: Option<usize>,
    pub chi_replica: Option<usize>,
    pub value: f64,
    pub stderr: Option<f64>,
    pub discarded_weight: Option<f64>,
}

impl TimeSeriesRecord {
    pub fn validate(&self) -> Result<()> {
        if !(self.time >= 0.0) {
            return invalid(format!("record time {} is negative", self.time));
        }
        if let Some(w) = self.discarded_weight {
            if !(0.0..=1.0).contains(&w) {
                return invalid(format!("discarded weight {w} outside [0, 1]"));
            }
        }
        Ok(())
    }
}

pub fn write_records<W: Write>(w: W, records: &[TimeSeriesRecord]) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(RECORD_HEADER)?;
    for r in records {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(r: R) -> Result<Vec<TimeSeriesRecord>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let missing: Vec<&str> = RECORD_HEADER.iter().copied().filter(|h| !header.iter().any(|x| x == h)).collect();
    let extra: Vec<&str> = header
        .iter()
        .map(String::as_str)
        .filter(|h| !RECORD_HEADER.contains(h))
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return invalid(format!("record schema mismatch: missing {missing:?}, unexpected {extra:?}"));
    }
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Points `(time, value)` of one observable/index among ensemble-level rows.
pub fn series(records: &[TimeSeriesRecord], observable: &str, index: Option<i64>) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.observable == observable && r.index == index && r.realization.is_none())
        .map(|r| (r.time, r.value))
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Arithmetic mean over realizations of every per-realization row, with the
/// standard error of the mean across realizations.
pub fn average_realizations(records: &[TimeSeriesRecord]) -> Vec<TimeSeriesRecord> {
    type Key = (u64, String, Option<i64>, usize, u64, u64, Option<usize>, Option<usize>);
    let mut groups: BTreeMap<Key, Vec<&TimeSeriesRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.realization.is_some()) {
        let key = (
            r.time.to_bits(),
            r.observable.clone(),
            r.index,
            r.len,
            r.jz.to_bits(),
            r.h.to_bits(),
            r.chi,
            r.chi_replica,
        );
        groups.entry(key).or_default().push(r);
    }
    let mut out: Vec<TimeSeriesRecord> = groups
        .into_values()
        .map(|mut rows| {
            rows.sort_by_key(|r| r.realization);
            let n = rows.len() as f64;
            let mean = rows.iter().map(|r| r.value).sum::<f64>() / n;
            let stderr = if rows.len() > 1 {
                let var = rows.iter().map(|r| (r.value - mean).powi(2)).sum::<f64>() / (n - 1.0);
                Some((var / n).sqrt())
            } else {
                None
            };
            let weights: Vec<f64> = rows.iter().filter_map(|r| r.discarded_weight).collect();
            let discarded = (!weights.is_empty()).then(|| weights.iter().sum::<f64>() / weights.len() as f64);
            TimeSeriesRecord {
                realization: None,
                value: mean,
                stderr,
                discarded_weight: discarded,
                ..rows[0].clone()
            }
        })
        .collect();
    out.sort_by(|a, b| {
        a.time
            .total_cmp(&b.time)
            .then_with(|| a.observable.cmp(&b.observable))
            .then_with(|| a.index.cmp(&b.index))
    });
    out
}

/// `<Z_j>` for every site of the normalized state.
pub fn magnetization_profile(m: &MatrixProductState) -> Result<Vec<f64>> {
    let z = [ONE, ZERO, ZERO, -ONE];
    Ok(m.local_expectations(&z)?.iter().map(|c: &C64| c.re.clamp(-1.0, 1.0)).collect())
}

/// Net polarization moved across the center, `2 (P_left - P_right)` with
/// `P = sum (S^z(t) - S^z(0)) / 2` over each half. Positive when a wall
/// with the down spins on the left melts.
pub fn polarization_transfer(profile_t: &[f64], profile_0: &[f64]) -> Result<f64> {
    let n = profile_t.len();
    if n != profile_0.len() {
        return Err(Error::DimensionMismatch(format!("profiles of length {n} and {}", profile_0.len())));
    }
    if n == 0 || n % 2 != 0 {
        return invalid(format!("polarization transfer needs an even chain, got {n}"));
    }
    let half = |range: std::ops::Range<usize>| -> f64 {
        range.map(|j| (profile_t[j] - profile_0[j]) / 4.0).sum()
    };
    Ok(2.0 * (half(0..n / 2) - half(n / 2..n)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub exponent: f64,
    pub exponent_error: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    pub r_squared: f64,
    pub points: usize,
}

pub const MIN_FIT_POINTS: usize = 5;

/// Least-squares line through `(ln t, ln y)` for points with `t` in `window`.
pub fn fit_power_law(series: &[(f64, f64)], window: (f64, f64)) -> Result<FitResult> {
    let (t_min, t_max) = window;
    if !(t_min < t_max) || !(t_min > 0.0) {
        return invalid(format!("fit window ({t_min}, {t_max}) must satisfy 0 < t_min < t_max"));
    }
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, _)| *t >= t_min && *t <= t_max)
        .copied()
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return invalid(format!("only {} points in fit window, need {MIN_FIT_POINTS}", pts.len()));
    }
    if let Some((t, y)) = pts.iter().find(|(_, y)| !(*y > 0.0)) {
        return invalid(format!("non-positive value {y} at t = {t}"));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 {
        return invalid("fit window has no spread in time");
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let sst: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r_squared = if sst > 0.0 { 1.0 - sse / sst } else { 1.0 };
    let exponent_error = (sse / (n - 2.0) / sxx).sqrt();
    Ok(FitResult {
        exponent: slope,
        exponent_error,
        intercept,
        window,
        r_squared,
        points: pts.len(),
    })
}

/// Default window: from `t_min` to the last point before saturation. The
/// tail is trimmed while its local log-slope sits more than 30% below the
/// mean log-slope of the window.
pub fn default_fit_window(series: &[(f64, f64)], t_min: f64) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = series.iter().filter(|(t, y)| *t >= t_min && *y > 0.0).copied().collect();
    if pts.len() < MIN_FIT_POINTS {
        return None;
    }
    let slopes: Vec<f64> = pts
        .windows(2)
        .map(|w| (w[1].1.ln() - w[0].1.ln()) / (w[1].0.ln() - w[0].0.ln()))
        .collect();
    let mut end = slopes.len();
    while end + 1 > MIN_FIT_POINTS {
        let mean = slopes[..end].iter().sum::<f64>() / end as f64;
        if mean > 0.0 && slopes[end - 1] < 0.7 * mean {
            end -= 1;
        } else {
            break;
        }
    }
    Some((pts[0].0, pts[end].0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InequalityKind {
    /// `M_a <= a / (a - 1) S_b` for `a > 1`, `b <= 2`, fixed magnetization.
    RatioBound,
    /// `M_a <= S_{1/2}` for `a >= 1/2`.
    HalfOrderBound,
    /// `M_a <= 2 S_{1/2}` for `a >= 1/2`, which follows from `D <= 1 + C_l1`.
    DoubledHalfOrderBound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub kind: InequalityKind,
    pub a: f64,
    pub b: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`.
    pub margin: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub fixed_magnetization: bool,
    pub checks: Vec<InequalityCheck>,
}

pub const MARGIN_TOLERANCE: f64 = 1e-10;

impl InequalityReport {
    pub fn violations(&self, kind: InequalityKind) -> usize {
        self.checks
            .iter()
            .filter(|c| c.kind == kind && c.margin < -MARGIN_TOLERANCE)
            .count()
    }

    pub fn min_margin(&self, kind: InequalityKind) -> Option<f64> {
        self.checks
            .iter()
            .filter(|c| c.kind == kind)
            .map(|c| c.margin)
            .min_by(f64::total_cmp)
    }
}

/// Whether all weight sits in one sector of total magnetization.
pub fn is_fixed_magnetization(v: &[C64]) -> bool {
    let mut sector = None;
    for (x, z) in v.iter().enumerate() {
        if z.norm_sqr() > 1e-24 {
            let w = x.count_ones();
            match sector {
                None => sector = Some(w),
                Some(s) if s != w => return false,
                _ => {}
            }
        }
    }
    true
}

/// Evaluates the entropy inequalities on a dense state. Violations are
/// reported through negative margins, never as errors.
pub fn check_inequalities(v: &[C64], a_list: &[f64], b_list: &[f64]) -> Result<InequalityReport> {
    qubits(v)?;
    let fixed = is_fixed_magnetization(v);
    let s_half = participation_entropy_exact(v, 0.5)?;
    let mut report = InequalityReport {
        fixed_magnetization: fixed,
        checks: Vec::new(),
    };
    let s_b: Vec<(f64, f64)> = b_list
        .iter()
        .map(|&b| participation_entropy_exact(v, b).map(|s| (b, s)))
        .collect::<Result<_>>()?;
    for &a in a_list {
        if a < 0.5 {
            continue;
        }
        let m_a = sre_exact(v, a)?;
        report.checks.push(InequalityCheck {
            kind: InequalityKind::HalfOrderBound,
            a,
            b: None,
            lhs: m_a,
            rhs: s_half,
            margin: s_half - m_a,
        });
        report.checks.push(InequalityCheck {
            kind: InequalityKind::DoubledHalfOrderBound,
            a,
            b: None,
            lhs: m_a,
            rhs: 2.0 * s_half,
            margin: 2.0 * s_half - m_a,
        });
        if fixed && a > 1.0 {
            for &(b, s) in s_b.iter().filter(|(b, _)| *b <= 2.0) {
                let rhs = a / (a - 1.0) * s;
                report.checks.push(InequalityCheck {
                    kind: InequalityKind::RatioBound,
                    a,
                    b: Some(b),
                    lhs: m_a,
                    rhs,
                    margin: rhs - m_a,
                });
            }
        }
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormCoherence {
    pub stabilizer_norm: f64,
    pub l1_coherence: f64,
    /// `1 + C_l1 - D`.
    pub margin: f64,
}

pub fn stabilizer_norm_and_coherence(v: &[C64]) -> Result<NormCoherence> {
    let d = stabilizer_norm(v)?;
    let c = l1_coherence(v)?;
    Ok(NormCoherence {
        stabilizer_norm: d,
        l1_coherence: c,
        margin: 1.0 + c - d,
    })
}
