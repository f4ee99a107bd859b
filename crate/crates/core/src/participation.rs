//! Participation entropy from the collision replica `V^(k-1) |psi>`.
//!
//! `V` is diagonal with `<x|V|x> = <x|psi>`, so the replica has amplitudes
//! `<x|psi>^k` and squared norm `sum_x p_x^k`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mpo::{apply_mpo, MatrixProductOperator};
use crate::mps::MatrixProductState;
use crate::tensor::TruncationSpec;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplicaDiagnostics {
    /// Discarded weight of each MPO application.
    pub discarded: Vec<f64>,
    /// Largest bond of the final replica.
    pub replica_bond: usize,
}

impl ReplicaDiagnostics {
    pub fn total_discarded(&self) -> f64 {
        self.discarded.iter().sum()
    }
}

/// Diagonal MPO whose entries are the amplitudes of `m`.
pub fn collision_mpo(m: &MatrixProductState) -> MatrixProductOperator {
    MatrixProductOperator::diagonal_from_state(m)
}

fn check_index(k: usize) -> Result<()> {
    if k < 2 {
        return invalid(format!("replica index {k} must be at least 2"));
    }
    Ok(())
}

/// `V^(k-1) |m>` for the normalized `m`, compressing after every application.
pub fn replica_state(
    m: &MatrixProductState,
    k: usize,
    spec: &TruncationSpec,
) -> Result<(MatrixProductState, ReplicaDiagnostics)> {
    check_index(k)?;
    spec.validate()?;
    let source = m.normalized()?;
    let v = collision_mpo(&source);
    let mut cur = source;
    let mut diag = ReplicaDiagnostics::default();
    for _ in 1..k {
        let (next, w) = apply_mpo(&v, &cur, spec)?;
        diag.discarded.push(w);
        cur = next;
    }
    diag.replica_bond = cur.max_bond();
    Ok((cur, diag))
}

/// Renyi participation entropy `S_k` in nats for integer `k >= 2`.
pub fn participation_entropy(
    m: &MatrixProductState,
    k: usize,
    spec: &TruncationSpec,
) -> Result<(f64, ReplicaDiagnostics)> {
    let (rep, diag) = replica_state(m, k, spec)?;
    let log_norm_sq = rep.log_norm_sq()?;
    if !log_norm_sq.is_finite() {
        return Err(Error::Invariant(format!("replica log norm {log_norm_sq} is not finite")));
    }
    Ok((log_norm_sq / (1.0 - k as f64), diag))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub chi: usize,
    pub value: f64,
    pub discarded: f64,
    /// `|S(chi) - S(previous chi)| / |S(chi)|`; absent for the first entry.
    pub relative_change: Option<f64>,
}

/// Replica caps scanned when no list is given.
pub const DEFAULT_CHI_SCAN: [usize; 5] = [16, 32, 64, 128, 256];

/// `S_k` for each replica cap in `chi_list` (strictly increasing).
pub fn convergence_scan(
    m: &MatrixProductState,
    k: usize,
    chi_list: &[usize],
    weight_cutoff: f64,
) -> Result<Vec<ConvergencePoint>> {
    if chi_list.is_empty() || chi_list.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("bond dimension list must be non-empty and strictly increasing");
    }
    let values: Vec<(usize, f64, f64)> = chi_list
        .par_iter()
        .map(|&chi| {
            let spec = TruncationSpec::new(chi, weight_cutoff)?;
            let (value, diag) = participation_entropy(m, k, &spec)?;
            Ok((chi, value, diag.total_discarded()))
        })
        .collect::<Result<_>>()?;
    let mut out: Vec<ConvergencePoint> = Vec::with_capacity(values.len());
    for (chi, value, discarded) in values {
        let relative_change = out.last().map(|p| relative_change(p.value, value));
        out.push(ConvergencePoint {
            chi,
            value,
            discarded,
            relative_change,
        });
    }
    Ok(out)
}

pub(crate) fn relative_change(previous: f64, current: f64) -> f64 {
    let diff = (current - previous).abs();
    if diff == 0.0 {
        0.0
    } else {
        diff / current.abs().max(previous.abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{densify, densify_operator, participation_entropy_exact, random_state};
    use crate::tensor::test_util::max_diff;
    use crate::tensor::{C64, ONE, ZERO};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const LN2: f64 = std::f64::consts::LN_2;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn mps(v: &[C64], len: usize) -> MatrixProductState {
        MatrixProductState::from_dense(v, len, 2, &TruncationSpec::lossless()).unwrap()
    }

    fn equal_superposition(len: usize, support: &[usize]) -> Vec<C64> {
        let a = 1.0 / (support.len() as f64).sqrt();
        let mut v = vec![ZERO; 1 << len];
        for &x in support {
            v[x] = C64::new(a, 0.0);
        }
        v
    }

    #[test]
    fn collision_mpo_of_product_state() {
        let m = MatrixProductState::from_product_state(&[0, 1], 2).unwrap();
        let d = densify_operator(&collision_mpo(&m)).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                let want = if r == c && r == 1 { ONE } else { ZERO };
                assert_eq!(d[r * 4 + c], want);
            }
        }
    }

    #[test]
    fn collision_mpo_diagonal_is_state() {
        let m = MatrixProductState::random(6, 2, 4, &mut rng(1)).unwrap();
        let v = densify(&m).unwrap();
        let d = densify_operator(&collision_mpo(&m)).unwrap();
        let diag: Vec<C64> = (0..64).map(|x| d[x * 64 + x]).collect();
        assert!(max_diff(&diag, &v) < 1e-12);
        assert_eq!(collision_mpo(&m).bond_dims(), m.bond_dims());
    }

    #[test]
    fn collision_mpo_on_uniform_state() {
        let m = MatrixProductState::random(4, 2, 3, &mut rng(2)).unwrap();
        let u = mps(&equal_superposition(4, &(0..16).collect::<Vec<_>>()), 4);
        let (out, _) = apply_mpo(&collision_mpo(&m), &u, &TruncationSpec::lossless()).unwrap();
        let want: Vec<C64> = densify(&m).unwrap().iter().map(|z| z / 4.0).collect();
        assert!(max_diff(&densify(&out).unwrap(), &want) < 1e-12);
    }

    #[test]
    fn replica_amplitudes_are_powers() {
        let m = MatrixProductState::random(6, 2, 4, &mut rng(3)).unwrap();
        let v = densify(&m).unwrap();
        let (rep, _) = replica_state(&m, 2, &TruncationSpec::lossless()).unwrap();
        let want: Vec<C64> = v.iter().map(|z| z * z).collect();
        assert!(max_diff(&densify(&rep).unwrap(), &want) < 1e-12);
    }

    #[test]
    fn replica_of_product_state() {
        let m = MatrixProductState::from_product_state(&[1, 0, 1], 2).unwrap();
        for k in 2..5 {
            let (rep, _) = replica_state(&m, k, &TruncationSpec::lossless()).unwrap();
            assert!(max_diff(&densify(&rep).unwrap(), &densify(&m).unwrap()) < 1e-14);
        }
    }

    #[test]
    fn small_state_anchors() {
        let bell = mps(&equal_superposition(2, &[1, 2]), 2);
        let (rep, _) = replica_state(&bell, 2, &TruncationSpec::lossless()).unwrap();
        assert!((rep.inner(&rep).unwrap().re - 0.5).abs() < 1e-12);
        let (s2, _) = participation_entropy(&bell, 2, &TruncationSpec::lossless()).unwrap();
        assert!((s2 - LN2).abs() < 1e-12);
        let w = mps(&equal_superposition(3, &[1, 2, 4]), 3);
        let (s2, _) = participation_entropy(&w, 2, &TruncationSpec::lossless()).unwrap();
        assert!((s2 - 3f64.ln()).abs() < 1e-12);
        let p = MatrixProductState::from_product_state(&[0, 1, 1, 0], 2).unwrap();
        for k in 2..5 {
            assert!(participation_entropy(&p, k, &TruncationSpec::lossless()).unwrap().0.abs() < 1e-14);
        }
    }

    #[test]
    fn matches_exact_on_random_states() {
        let mut r = rng(4);
        for _ in 0..5 {
            let m = MatrixProductState::random(8, 2, 8, &mut r).unwrap();
            let v = densify(&m).unwrap();
            for k in 2..4 {
                let (s, _) = participation_entropy(&m, k, &TruncationSpec::lossless()).unwrap();
                let want = participation_entropy_exact(&v, k as f64).unwrap();
                assert!((s - want).abs() < 1e-8, "k={k}: {s} vs {want}");
            }
        }
        let v = random_state(8, &mut r);
        let (s, _) = participation_entropy(&mps(&v, 8), 2, &TruncationSpec::lossless()).unwrap();
        assert!((s - participation_entropy_exact(&v, 2.0).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn unnormalized_source_is_normalized() {
        let m = MatrixProductState::random(6, 2, 4, &mut rng(5)).unwrap();
        let scaled = m.clone().with_log_norm(3.0);
        let a = participation_entropy(&m, 2, &TruncationSpec::lossless()).unwrap().0;
        let b = participation_entropy(&scaled, 2, &TruncationSpec::lossless()).unwrap().0;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn convergence_scan_reaches_exact() {
        let m = MatrixProductState::random(8, 2, 6, &mut rng(6)).unwrap();
        let want = participation_entropy_exact(&densify(&m).unwrap(), 2.0).unwrap();
        let scan = convergence_scan(&m, 2, &[2, 4, 8, 16, 36], 0.0).unwrap();
        assert_eq!(scan[0].relative_change, None);
        assert!((scan.last().unwrap().value - want).abs() < 1e-8);
        let p = MatrixProductState::from_product_state(&[0; 6], 2).unwrap();
        let flat = convergence_scan(&p, 2, &[1, 2, 4], 0.0).unwrap();
        assert!(flat.iter().all(|c| c.value.abs() < 1e-14));
        assert!(convergence_scan(&p, 2, &[4, 2], 0.0).is_err());
    }

    #[test]
    fn rejects_index_below_two() {
        let p = MatrixProductState::from_product_state(&[0; 2], 2).unwrap();
        assert!(participation_entropy(&p, 1, &TruncationSpec::lossless()).is_err());
    }
}
