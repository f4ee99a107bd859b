//! Exact cross-checks of tensor-network estimates on small chains.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use spinmagic::analysis::{observable, TimeSeriesRecord};

use crate::config::{Method, PePlan, SimulationConfig, SrePlan};
use crate::error::Result;

/// Largest replica deviation accepted from the dense result.
pub const REPLICA_TOLERANCE: f64 = 1e-8;
/// Sampling estimates are accepted within this many standard errors.
pub const SAMPLING_SIGMAS: f64 = 5.0;

/// Adds an exact plan for every Renyi index that lacks one. A config without
/// plans gets replica and exact plans at index 2.
pub fn with_exact_checks(cfg: &SimulationConfig) -> Result<SimulationConfig> {
    let mut out = cfg.clone();
    if out.pe.is_empty() && out.sre.is_empty() {
        out.pe.push(PePlan {
            k: 2,
            chi: None,
            method: Method::Replica,
            samples: None,
        });
        out.sre.push(SrePlan {
            n: 2,
            chi: None,
            method: Method::Replica,
            samples: None,
        });
    }
    let mut pe_idx: Vec<usize> = out.pe.iter().map(|p| p.k).collect();
    pe_idx.sort_unstable();
    pe_idx.dedup();
    for k in pe_idx {
        if !out.pe.iter().any(|p| p.k == k && p.method == Method::Exact) {
            out.pe.push(PePlan {
                k,
                chi: None,
                method: Method::Exact,
                samples: None,
            });
        }
    }
    let mut sre_idx: Vec<usize> = out.sre.iter().map(|p| p.n).collect();
    sre_idx.sort_unstable();
    sre_idx.dedup();
    for n in sre_idx {
        if !out.sre.iter().any(|p| p.n == n && p.method == Method::Exact) {
            out.sre.push(SrePlan {
                n,
                chi: None,
                method: Method::Exact,
                samples: None,
            });
        }
    }
    out.validate()?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub observable: String,
    pub reference: String,
    pub index: Option<i64>,
    pub chi_replica: Option<usize>,
    pub realization: Option<usize>,
    pub points: usize,
    pub max_abs_diff: f64,
    /// Largest deviation in units of the reported standard error (sampling only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_sigmas: Option<f64>,
    pub passed: bool,
}

fn reference_of(obs: &str) -> Option<&'static str> {
    match obs {
        observable::PE | observable::PE_SAMPLING => Some(observable::PE_EXACT),
        observable::SRE | observable::SRE_SAMPLING => Some(observable::SRE_EXACT),
        _ => None,
    }
}

/// Compares every estimated series with the exact series at matching times.
pub fn compare(records: &[TimeSeriesRecord]) -> Vec<OracleCheck> {
    type RefKey = (u64, &'static str, Option<i64>, Option<usize>);
    let mut exact: BTreeMap<RefKey, f64> = BTreeMap::new();
    for r in records {
        let key = match r.observable.as_str() {
            observable::PE_EXACT => observable::PE_EXACT,
            observable::SRE_EXACT => observable::SRE_EXACT,
            _ => continue,
        };
        exact.insert((r.time.to_bits(), key, r.index, r.realization), r.value);
    }
    type CheckKey = (String, Option<i64>, Option<usize>, Option<usize>);
    let mut checks: BTreeMap<CheckKey, OracleCheck> = BTreeMap::new();
    for r in records {
        let Some(reference) = reference_of(&r.observable) else {
            continue;
        };
        let Some(&want) = exact.get(&(r.time.to_bits(), reference, r.index, r.realization)) else {
            continue;
        };
        let sampling = r.stderr.is_some();
        let c = checks
            .entry((r.observable.clone(), r.index, r.chi_replica, r.realization))
            .or_insert_with(|| OracleCheck {
                observable: r.observable.clone(),
                reference: reference.to_string(),
                index: r.index,
                chi_replica: r.chi_replica,
                realization: r.realization,
                points: 0,
                max_abs_diff: 0.0,
                max_sigmas: sampling.then_some(0.0),
                passed: true,
            });
        let diff = (r.value - want).abs();
        c.points += 1;
        c.max_abs_diff = c.max_abs_diff.max(diff);
        let ok = match r.stderr {
            Some(se) => {
                let sig = if se > 0.0 { diff / se } else if diff < 1e-12 { 0.0 } else { f64::INFINITY };
                let m = c.max_sigmas.get_or_insert(0.0);
                *m = m.max(sig);
                sig <= SAMPLING_SIGMAS
            }
            None => diff <= REPLICA_TOLERANCE,
        };
        c.passed &= ok;
    }
    checks.into_values().collect()
}
