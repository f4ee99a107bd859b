//! Perfect sampling from right-canonical MPS and Monte-Carlo entropy
//! estimators with jackknife errors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mps::{CanonicalForm, MatrixProductState};
use crate::stabilizer::{pauli_mps, PauliMps, PauliString};
use crate::tensor::{TruncationSpec, C64, ZERO};

const CONDITIONAL_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    /// Drawn strings (base-d digits) and their probabilities.
    pub entries: Vec<(Vec<usize>, f64)>,
    pub estimator_value: f64,
    pub standard_error: f64,
    /// Jackknife estimate of the bias of the plug-in estimator.
    pub bias_estimate: f64,
    pub n_samples: usize,
    pub seed: u64,
}

/// One autoregressive draw. Returns the string and its Born probability.
pub fn sample_string(m: &MatrixProductState, rng: &mut impl Rng) -> Result<(Vec<usize>, f64)> {
    if m.canonical_form() != CanonicalForm::Right {
        return Err(Error::CanonicalForm("sampling needs a right-canonical state".into()));
    }
    let d = m.physical_dim();
    let mut env = vec![C64::new(1.0, 0.0)];
    let mut prob = 1.0;
    let mut out = Vec::with_capacity(m.len());
    let mut branch = vec![Vec::new(); d];
    let mut weights = vec![0.0; d];
    for (site, t) in m.sites().iter().enumerate() {
        let (l, r) = (t.shape()[0], t.shape()[2]);
        let data = t.data();
        for s in 0..d {
            let w = &mut branch[s];
            w.clear();
            w.resize(r, ZERO);
            for (a, e) in env.iter().enumerate().take(l) {
                if *e == ZERO {
                    continue;
                }
                let row = &data[(a * d + s) * r..(a * d + s + 1) * r];
                for (x, y) in w.iter_mut().zip(row) {
                    *x += e * y;
                }
            }
            weights[s] = w.iter().map(|z| z.norm_sqr()).sum();
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > CONDITIONAL_TOLERANCE {
            return Err(Error::CanonicalForm(format!(
                "conditional probabilities at site {site} sum to {total}"
            )));
        }
        let u: f64 = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = None;
        for (s, &p) in weights.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            acc += p;
            chosen = Some(s);
            if u < acc {
                break;
            }
        }
        let s = chosen.ok_or_else(|| Error::Invariant(format!("no sampling support at site {site}")))?;
        let p = weights[s] / total;
        prob *= p;
        let scale = 1.0 / weights[s].sqrt();
        env = branch[s].iter().map(|z| z * scale).collect();
        out.push(s);
    }
    Ok((out, prob))
}

/// Draws a computational-basis string from `|<x|m>|^2`.
pub fn sample_bitstring(m: &MatrixProductState, rng: &mut impl Rng) -> Result<(Vec<usize>, f64)> {
    sample_string(m, rng)
}

/// Draws a Pauli string from `<P>^2 / 2^L`.
pub fn sample_pauli(p: &PauliMps, rng: &mut impl Rng) -> Result<(PauliString, f64)> {
    let (digits, xi) = sample_string(&p.state, rng)?;
    Ok((PauliString::from_digits(&digits)?, xi))
}

/// Jackknife over samples of `f(mean(x))`. Returns `(f(mean), stderr, bias)`.
fn jackknife(x: &[f64], f: impl Fn(f64) -> f64) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let sum: f64 = x.iter().sum();
    let full = f(sum / n);
    let loo: Vec<f64> = x.iter().map(|xi| f((sum - xi) / (n - 1.0))).collect();
    let mean_loo = loo.iter().sum::<f64>() / n;
    let var = loo.iter().map(|t| (t - mean_loo) * (t - mean_loo)).sum::<f64>() * (n - 1.0) / n;
    (full, var.max(0.0).sqrt(), (n - 1.0) * (mean_loo - full))
}

/// Renyi estimator from sampled probabilities: `ln(mean(P^(k-1))) / (1 - k)`
/// for `k > 1`, `-mean(ln P)` for `k = 1`, shifted by `offset`.
fn renyi_batch(entries: Vec<(Vec<usize>, f64)>, k: usize, offset: f64, seed: u64) -> SampleBatch {
    let n_samples = entries.len();
    let (value, se, bias) = if k == 1 {
        let x: Vec<f64> = entries.iter().map(|e| -e.1.ln()).collect();
        jackknife(&x, |m| m + offset)
    } else {
        let x: Vec<f64> = entries.iter().map(|e| e.1.powi(k as i32 - 1)).collect();
        jackknife(&x, |m| m.ln() / (1.0 - k as f64) + offset)
    };
    SampleBatch {
        entries,
        estimator_value: value,
        standard_error: se,
        bias_estimate: bias,
        n_samples,
        seed,
    }
}

fn draw_many(m: &MatrixProductState, n_samples: usize, seed: u64) -> Result<Vec<(Vec<usize>, f64)>> {
    if n_samples < 2 {
        return invalid(format!("need at least 2 samples, got {n_samples}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_samples).map(|_| sample_string(m, &mut rng)).collect()
}

/// Participation entropy `S_k` (k >= 1) estimated from `n_samples` draws.
pub fn estimate_pe(m: &MatrixProductState, k: usize, n_samples: usize, seed: u64) -> Result<SampleBatch> {
    if k < 1 {
        return invalid("Renyi index must be at least 1");
    }
    let source = m.canonicalize(CanonicalForm::Right)?.with_log_norm(0.0);
    let entries = draw_many(&source, n_samples, seed)?;
    Ok(renyi_batch(entries, k, 0.0, seed))
}

/// Stabilizer Renyi entropy `M_n` (n >= 1) estimated by sampling the Pauli
/// MPS built with `spec`.
pub fn estimate_sre(
    m: &MatrixProductState,
    n: usize,
    n_samples: usize,
    spec: &TruncationSpec,
    seed: u64,
) -> Result<SampleBatch> {
    if n < 1 {
        return invalid("Renyi index must be at least 1");
    }
    let p = pauli_mps(m, spec)?;
    let entries = draw_many(&p.state, n_samples, seed)?;
    let offset = -(m.len() as f64) * std::f64::consts::LN_2;
    Ok(renyi_batch(entries, n, offset, seed))
}
