//! Pauli-vector MPS and stabilizer Renyi entropy.
//!
//! The Pauli vector of a pure state has components `<psi|P|psi> / sqrt(2^L)`
//! over all Pauli strings. Its MPS uses a four-dimensional local basis with
//! digit `2 z + x`: I = 0, X = 1, Z = 2, Y = 3.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mpo::{apply_mpo, MatrixProductOperator};
use crate::mps::{CanonicalForm, MatrixProductState};
use crate::participation::ReplicaDiagnostics;
use crate::tensor::{Tensor, TruncationSpec, C64, ONE, ZERO};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Z, Pauli::Y];

    /// Local digit `2 z + x`.
    pub fn digit(self) -> usize {
        match self {
            Pauli::I => 0,
            Pauli::X => 1,
            Pauli::Z => 2,
            Pauli::Y => 3,
        }
    }

    pub fn from_digit(d: usize) -> Option<Self> {
        Self::ALL.get(d).copied()
    }

    /// Row-major 2 x 2 matrix.
    pub fn matrix(self) -> [C64; 4] {
        let i = C64::new(0.0, 1.0);
        match self {
            Pauli::I => [ONE, ZERO, ZERO, ONE],
            Pauli::X => [ZERO, ONE, ONE, ZERO],
            Pauli::Y => [ZERO, -i, i, ZERO],
            Pauli::Z => [ONE, ZERO, ZERO, -ONE],
        }
    }

    fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliString {
    labels: Vec<Pauli>,
}

impl PauliString {
    pub fn new(labels: Vec<Pauli>) -> Self {
        Self { labels }
    }

    pub fn identity(len: usize) -> Self {
        Self::new(vec![Pauli::I; len])
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[Pauli] {
        &self.labels
    }

    /// Base-4 digits, one per site.
    pub fn digits(&self) -> Vec<usize> {
        self.labels.iter().map(|p| p.digit()).collect()
    }

    pub fn from_digits(digits: &[usize]) -> Result<Self> {
        digits
            .iter()
            .map(|&d| Pauli::from_digit(d).ok_or_else(|| Error::InvalidInput(format!("Pauli digit {d}"))))
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }

    /// String with base-4 index `idx`, site 0 most significant.
    pub fn from_index(idx: usize, len: usize) -> Self {
        Self::new(
            (0..len)
                .map(|j| Pauli::ALL[(idx >> (2 * (len - 1 - j))) & 3])
                .collect(),
        )
    }

    pub fn index(&self) -> usize {
        self.labels.iter().fold(0, |acc, p| acc * 4 + p.digit())
    }

    /// Bit masks of the X and Z parts (site 0 most significant).
    pub fn masks(&self) -> (usize, usize) {
        let n = self.len();
        let mut x = 0;
        let mut z = 0;
        for (j, p) in self.labels.iter().enumerate() {
            let bit = 1 << (n - 1 - j);
            let d = p.digit();
            if d & 1 == 1 {
                x |= bit;
            }
            if d & 2 == 2 {
                z |= bit;
            }
        }
        (x, z)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.labels.iter().try_for_each(|p| write!(f, "{}", p.symbol()))
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(Error::InvalidInput(format!("unknown Pauli label {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }
}

/// Pauli vector of a normalized state as a right-canonical MPS with d = 4.
#[derive(Clone, Debug)]
pub struct PauliMps {
    pub state: MatrixProductState,
    /// Largest bond of the source state.
    pub source_bond: usize,
    /// Summed relative operator weight dropped while building.
    pub discarded_weight: f64,
}

impl PauliMps {
    pub fn bond(&self) -> usize {
        self.state.max_bond()
    }
}

/// Pairs `(j, k)` of Schmidt indices kept on one bond, ordered by weight.
fn select_pairs(lambda: &[f64], spec: &TruncationSpec) -> (Vec<(usize, usize)>, f64) {
    let mut pairs: Vec<(usize, usize, f64)> = Vec::with_capacity(lambda.len() * lambda.len());
    for (j, a) in lambda.iter().enumerate() {
        for (k, b) in lambda.iter().enumerate() {
            pairs.push((j, k, a * b));
        }
    }
    pairs.sort_by(|x, y| y.2.total_cmp(&x.2).then((x.0, x.1).cmp(&(y.0, y.1))));
    let values: Vec<f64> = pairs.iter().map(|p| p.2).collect();
    let (rank, discarded) = spec.select(&values);
    (pairs[..rank].iter().map(|p| (p.0, p.1)).collect(), discarded)
}

/// Builds the Pauli MPS. The state's Schmidt form makes the operator Schmidt
/// values of `|psi><psi|` equal to products of state Schmidt values, so each
/// bond is truncated by keeping the heaviest index pairs.
pub fn pauli_mps(m: &MatrixProductState, spec: &TruncationSpec) -> Result<PauliMps> {
    spec.validate()?;
    if m.physical_dim() != 2 {
        return invalid("Pauli MPS needs a qubit state");
    }
    let (a, spectra, _) = m.schmidt_form(&TruncationSpec::lossless())?;
    let n = a.len();
    let mut kept = Vec::with_capacity(n + 1);
    kept.push(vec![(0usize, 0usize)]);
    let mut discarded = 0.0;
    for lambda in &spectra {
        let (pairs, w) = select_pairs(lambda, spec);
        discarded += w;
        kept.push(pairs);
    }
    kept.push(vec![(0, 0)]);
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let i = C64::new(0.0, 1.0);
    let mut sites = Vec::with_capacity(n);
    for (site, t) in a.sites().iter().enumerate() {
        let r = t.shape()[2];
        let data = t.data();
        let at = |x: usize, s: usize, y: usize| data[(x * 2 + s) * r + y];
        let (left, right) = (&kept[site], &kept[site + 1]);
        let mut out = vec![ZERO; left.len() * 4 * right.len()];
        for (p, &(j, k)) in left.iter().enumerate() {
            for (q, &(j2, k2)) in right.iter().enumerate() {
                // e_{s s'} = A^s[j, j'] conj(A^{s'}[k, k'])
                let e00 = at(j, 0, j2) * at(k, 0, k2).conj();
                let e01 = at(j, 0, j2) * at(k, 1, k2).conj();
                let e10 = at(j, 1, j2) * at(k, 0, k2).conj();
                let e11 = at(j, 1, j2) * at(k, 1, k2).conj();
                // component_alpha = sum_{s s'} <s'|P|s> e_{s s'}
                let vals = [e00 + e11, e10 + e01, e00 - e11, i * e01 - i * e10];
                for (alpha, v) in vals.iter().enumerate() {
                    out[(p * 4 + alpha) * right.len() + q] = v * inv_sqrt2;
                }
            }
        }
        sites.push(Tensor::from_vec(vec![left.len(), 4, right.len()], out)?);
    }
    let state = MatrixProductState::new(sites, 4)?
        .with_log_norm(0.0)
        .canonicalize(CanonicalForm::Right)?
        .with_log_norm(0.0);
    Ok(PauliMps {
        state,
        source_bond: m.max_bond(),
        discarded_weight: discarded,
    })
}

/// Stabilizer Renyi entropy `M_n` (nats, integer `n >= 2`) from the replica
/// norm of `W^(n-1) |P(psi)>`. `spec` caps both the Pauli MPS and the replicas.
pub fn stabilizer_renyi_entropy(
    m: &MatrixProductState,
    n: usize,
    spec: &TruncationSpec,
) -> Result<(f64, SreDiagnostics)> {
    if n < 2 {
        return invalid(format!("replica index {n} must be at least 2"));
    }
    let p = pauli_mps(m, spec)?;
    let w = MatrixProductOperator::diagonal_from_state(&p.state);
    let mut cur = p.state.clone();
    let mut replica = ReplicaDiagnostics::default();
    for _ in 1..n {
        let (next, d) = apply_mpo(&w, &cur, spec)?;
        replica.discarded.push(d);
        cur = next;
    }
    replica.replica_bond = cur.max_bond();
    let log_norm_sq = cur.log_norm_sq()?;
    if !log_norm_sq.is_finite() {
        return Err(Error::Invariant(format!("Pauli replica log norm {log_norm_sq} is not finite")));
    }
    let value = log_norm_sq / (1.0 - n as f64) - m.len() as f64 * std::f64::consts::LN_2;
    Ok((
        value,
        SreDiagnostics {
            pauli_bond: p.bond(),
            pauli_discarded: p.discarded_weight,
            replica,
        },
    ))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SreDiagnostics {
    pub pauli_bond: usize,
    pub pauli_discarded: f64,
    pub replica: ReplicaDiagnostics,
}

impl SreDiagnostics {
    pub fn total_discarded(&self) -> f64 {
        self.pauli_discarded + self.replica.total_discarded()
    }
}

/// Squared norm of the Pauli vector restricted to strings of I and Z.
pub fn zeta_z(m: &MatrixProductState, spec: &TruncationSpec) -> Result<f64> {
    let p = pauli_mps(m, spec)?;
    let sites = p
        .state
        .sites()
        .iter()
        .map(|t| {
            let (l, r) = (t.shape()[0], t.shape()[2]);
            let d = t.data();
            Tensor::from_fn(&[l, 2, r], |ix| d[(ix[0] * 4 + 2 * ix[1]) * r + ix[2]])
        })
        .collect();
    let restricted = MatrixProductState::new(sites, 2)?;
    Ok(restricted.log_norm_sq()?.exp())
}
