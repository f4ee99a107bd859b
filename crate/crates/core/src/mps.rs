//! Matrix product states.
//!
//! Site tensors have axes `(left bond, physical, right bond)`. Overall scale is
//! kept out of the tensors: after any canonicalization or truncation the
//! tensors describe a unit vector and the logarithm of the true norm lives in
//! `log_norm`. Replica states have norms like `exp(-L)` and would underflow
//! otherwise.
//!
//! Basis label 0 is spin up (Z = +1). Dense indices put site 0 in the most
//! significant position.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::tensor::{matmul_adj_rm, matmul_rm, permute_raw, qr_matrix, svd_matrix, Tensor, TruncationSpec, C64, ONE, ZERO};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CanonicalForm {
    None,
    /// Every site except the last is a left isometry.
    Left,
    /// Every site except the first is a right isometry.
    Right,
    /// Sites left of the center are left isometries, right of it right isometries.
    Mixed(usize),
}

#[derive(Clone, Debug)]
pub struct MatrixProductState {
    sites: Vec<Tensor>,
    physical_dim: usize,
    canonical_form: CanonicalForm,
    log_norm: f64,
}

impl MatrixProductState {
    pub fn new(sites: Vec<Tensor>, physical_dim: usize) -> Result<Self> {
        if sites.is_empty() {
            return invalid("an MPS needs at least one site");
        }
        let mut prev = 1;
        for (i, t) in sites.iter().enumerate() {
            let s = t.shape();
            if s.len() != 3 || s[1] != physical_dim {
                return invalid(format!("site {i} has shape {s:?}, expected (_, {physical_dim}, _)"));
            }
            if s[0] != prev {
                return Err(Error::DimensionMismatch(format!(
                    "site {i} left bond {} does not match previous right bond {prev}",
                    s[0]
                )));
            }
            prev = s[2];
        }
        if prev != 1 {
            return Err(Error::DimensionMismatch("right boundary bond must be 1".into()));
        }
        Ok(Self {
            sites,
            physical_dim,
            canonical_form: CanonicalForm::None,
            log_norm: 0.0,
        })
    }

    pub(crate) fn from_parts(sites: Vec<Tensor>, physical_dim: usize, form: CanonicalForm, log_norm: f64) -> Self {
        Self {
            sites,
            physical_dim,
            canonical_form: form,
            log_norm,
        }
    }

    pub fn from_product_state(bits: &[usize], physical_dim: usize) -> Result<Self> {
        if bits.is_empty() {
            return invalid("product state needs at least one site");
        }
        let mut sites = Vec::with_capacity(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b >= physical_dim {
                return invalid(format!("label {b} at site {i} exceeds physical dimension {physical_dim}"));
            }
            let mut t = Tensor::zeros(&[1, physical_dim, 1]);
            t.data_mut()[b] = ONE;
            sites.push(t);
        }
        Ok(Self::from_parts(sites, physical_dim, CanonicalForm::Right, 0.0))
    }

    /// Normalized state with Gaussian random tensors and bonds capped at `chi`.
    pub fn random(len: usize, physical_dim: usize, chi: usize, rng: &mut impl Rng) -> Result<Self> {
        if len == 0 || chi == 0 || physical_dim == 0 {
            return invalid("random MPS needs positive length, bond and physical dimension");
        }
        let cap = |j: usize| -> usize {
            let from_left = (physical_dim as f64).powi(j.min(62) as i32);
            let from_right = (physical_dim as f64).powi((len - j).min(62) as i32);
            (chi as f64).min(from_left).min(from_right) as usize
        };
        let sites = (0..len)
            .map(|j| {
                Tensor::from_fn(&[cap(j), physical_dim, cap(j + 1)], |_| {
                    C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
                })
            })
            .collect();
        let m = Self::new(sites, physical_dim)?.canonicalize(CanonicalForm::Right)?;
        Ok(m.with_log_norm(0.0))
    }

    /// Exact MPS of a dense vector by sequential SVD.
    pub fn from_dense(vector: &[C64], len: usize, physical_dim: usize, spec: &TruncationSpec) -> Result<Self> {
        let total = physical_dim.checked_pow(len as u32).unwrap_or(0);
        if total != vector.len() {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} is not {physical_dim}^{len}",
                vector.len()
            )));
        }
        let mut rest = vector.to_vec();
        let mut left = 1usize;
        let mut sites = Vec::with_capacity(len);
        let mut log_norm = 0.0;
        for j in 0..len - 1 {
            let rows = left * physical_dim;
            let cols = rest.len() / rows;
            let svd = svd_matrix(&rest, rows, cols, spec)?;
            let nrm = svd.s.iter().map(|s| s * s).sum::<f64>().sqrt();
            if nrm == 0.0 {
                return Err(Error::Invariant(format!("zero vector at site {j}")));
            }
            log_norm += nrm.ln();
            sites.push(Tensor::from_raw(vec![left, physical_dim, svd.rank], svd.u));
            rest = svd.vh;
            for (r, s) in svd.s.iter().enumerate() {
                for z in &mut rest[r * cols..(r + 1) * cols] {
                    *z *= s / nrm;
                }
            }
            left = svd.rank;
        }
        sites.push(Tensor::from_raw(vec![left, physical_dim, 1], rest));
        let mut m = Self::from_parts(sites, physical_dim, CanonicalForm::Left, log_norm);
        m.normalize_site(len - 1)?;
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn physical_dim(&self) -> usize {
        self.physical_dim
    }

    pub fn sites(&self) -> &[Tensor] {
        &self.sites
    }

    pub fn site(&self, i: usize) -> &Tensor {
        &self.sites[i]
    }

    pub fn canonical_form(&self) -> CanonicalForm {
        self.canonical_form
    }

    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    pub fn with_log_norm(mut self, log_norm: f64) -> Self {
        self.log_norm = log_norm;
        self
    }

    /// Internal bond dimensions, `len - 1` entries.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.sites[..self.len() - 1].iter().map(|t| t.shape()[2]).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Same vector, unit norm.
    pub fn normalized(&self) -> Result<Self> {
        let form = match self.canonical_form {
            CanonicalForm::None => CanonicalForm::Right,
            f => f,
        };
        Ok(self.canonicalize(form)?.with_log_norm(0.0))
    }

    pub(crate) fn dims(&self, i: usize) -> (usize, usize, usize) {
        let s = self.sites[i].shape();
        (s[0], s[1], s[2])
    }

    /// QR of site `i` as (left*d, right); R is pushed into site `i + 1`.
    fn left_qr(&mut self, i: usize) -> Result<()> {
        let (l, d, r) = self.dims(i);
        let (q, rr, k) = qr_matrix(self.sites[i].data(), l * d, r)?;
        self.sites[i] = Tensor::from_raw(vec![l, d, k], q);
        let (_, d1, r1) = self.dims(i + 1);
        let next = matmul_rm(&rr, k, r, self.sites[i + 1].data(), d1 * r1);
        self.sites[i + 1] = Tensor::from_raw(vec![k, d1, r1], next);
        Ok(())
    }

    /// LQ of site `i` as (left, d*right); L is pushed into site `i - 1`.
    fn right_lq(&mut self, i: usize) -> Result<()> {
        let (l, d, r) = self.dims(i);
        let cols = d * r;
        let data = self.sites[i].data();
        let mut adj = vec![ZERO; l * cols];
        for a in 0..l {
            for c in 0..cols {
                adj[c * l + a] = data[a * cols + c].conj();
            }
        }
        // M^H = Q R  =>  M = R^H Q^H
        let (q, rr, k) = qr_matrix(&adj, cols, l)?;
        let mut qh = vec![ZERO; k * cols];
        for c in 0..cols {
            for j in 0..k {
                qh[j * cols + c] = q[c * k + j].conj();
            }
        }
        self.sites[i] = Tensor::from_raw(vec![k, d, r], qh);
        let mut rh = vec![ZERO; l * k];
        for j in 0..k {
            for a in 0..l {
                rh[a * k + j] = rr[j * l + a].conj();
            }
        }
        let (l0, d0, _) = self.dims(i - 1);
        let prev = matmul_rm(self.sites[i - 1].data(), l0 * d0, l, &rh, k);
        self.sites[i - 1] = Tensor::from_raw(vec![l0, d0, k], prev);
        Ok(())
    }

    /// Rescales site `i` to unit Frobenius norm, moving the scale into `log_norm`.
    pub(crate) fn normalize_site(&mut self, i: usize) -> Result<()> {
        let n = self.sites[i].norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Invariant(format!("site {i} has norm {n}")));
        }
        let inv = 1.0 / n;
        for z in self.sites[i].data_mut() {
            *z *= inv;
        }
        self.log_norm += n.ln();
        Ok(())
    }

    fn center(&self) -> Option<usize> {
        match self.canonical_form {
            CanonicalForm::None => None,
            CanonicalForm::Left => Some(self.len() - 1),
            CanonicalForm::Right => Some(0),
            CanonicalForm::Mixed(c) => Some(c),
        }
    }

    /// Moves the orthogonality center to `to`, canonicalizing first if needed.
    pub(crate) fn move_center(&mut self, to: usize) -> Result<()> {
        let Some(from) = self.center() else {
            *self = self.canonicalize(CanonicalForm::Mixed(to))?;
            return Ok(());
        };
        for i in from..to {
            self.left_qr(i)?;
        }
        for i in (to + 1..=from).rev() {
            self.right_lq(i)?;
        }
        self.canonical_form = CanonicalForm::Mixed(to);
        Ok(())
    }

    pub fn canonicalize(&self, form: CanonicalForm) -> Result<Self> {
        let n = self.len();
        let mut m = self.clone();
        let center = match form {
            CanonicalForm::None => return Ok(m),
            CanonicalForm::Left => n - 1,
            CanonicalForm::Right => 0,
            CanonicalForm::Mixed(c) => {
                if c >= n {
                    return invalid(format!("center {c} outside chain of length {n}"));
                }
                c
            }
        };
        for i in 0..center {
            m.left_qr(i)?;
        }
        for i in (center + 1..n).rev() {
            m.right_lq(i)?;
        }
        m.normalize_site(center)?;
        m.canonical_form = form;
        Ok(m)
    }

    /// Logarithm of the squared norm.
    pub fn log_norm_sq(&self) -> Result<f64> {
        let m = self.canonicalize(CanonicalForm::Right)?;
        Ok(2.0 * m.log_norm)
    }

    /// `<self|other>`, including both `log_norm` factors.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        let (log_scale, value) = self.log_inner(other)?;
        Ok(value * log_scale.exp())
    }

    /// Overlap as `(log scale, unit-scale value)`.
    pub(crate) fn log_inner(&self, other: &Self) -> Result<(f64, C64)> {
        if self.len() != other.len() || self.physical_dim != other.physical_dim {
            return Err(Error::DimensionMismatch(format!(
                "overlap of MPS with (L, d) = ({}, {}) and ({}, {})",
                self.len(),
                self.physical_dim,
                other.len(),
                other.physical_dim
            )));
        }
        let mut env = vec![ONE];
        let (mut da, mut db) = (1usize, 1usize);
        let mut log_scale = self.log_norm + other.log_norm;
        for (a, b) in self.sites.iter().zip(&other.sites) {
            let (_, d, ra) = (a.shape()[0], a.shape()[1], a.shape()[2]);
            let rb = b.shape()[2];
            let tmp = matmul_rm(&env, da, db, b.data(), d * rb);
            env = matmul_adj_rm(a.data(), da * d, ra, &tmp, rb);
            da = ra;
            db = rb;
            let scale = env.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if scale > 0.0 {
                for z in &mut env {
                    *z /= scale;
                }
                log_scale += scale.ln();
            }
        }
        Ok((log_scale, env[0]))
    }

    pub fn amplitude(&self, basis: &[usize]) -> Result<C64> {
        if basis.len() != self.len() {
            return invalid(format!("basis string of length {} for chain of length {}", basis.len(), self.len()));
        }
        let mut row = vec![ONE];
        for (i, (&s, t)) in basis.iter().zip(&self.sites).enumerate() {
            if s >= self.physical_dim {
                return invalid(format!("label {s} at site {i} exceeds physical dimension"));
            }
            let (l, d, r) = (t.shape()[0], t.shape()[1], t.shape()[2]);
            let data = t.data();
            let mut next = vec![ZERO; r];
            for (a, &v) in row.iter().enumerate().take(l) {
                let off = (a * d + s) * r;
                for (b, n) in next.iter_mut().enumerate() {
                    *n += v * data[off + b];
                }
            }
            row = next;
        }
        Ok(row[0] * self.log_norm.exp())
    }

    /// Truncates every bond with `spec` in a single canonical sweep. The
    /// result is left-canonical; the weight lost to truncation is reflected
    /// in `log_norm`.
    pub fn compress(&self, spec: &TruncationSpec) -> Result<(Self, f64)> {
        spec.validate()?;
        let mut m = self.canonicalize(CanonicalForm::Right)?;
        let mut discarded = 0.0;
        for i in 0..m.len() - 1 {
            discarded += m.truncate_bond_right(i, spec)?;
        }
        m.normalize_site(m.len() - 1)?;
        m.canonical_form = CanonicalForm::Left;
        Ok((m, discarded))
    }

    /// SVD of site `i` (the orthogonality center) as (left*d, right); U stays,
    /// S V^H moves into site `i + 1` with S normalized.
    fn truncate_bond_right(&mut self, i: usize, spec: &TruncationSpec) -> Result<f64> {
        let (l, d, r) = self.dims(i);
        let svd = svd_matrix(self.sites[i].data(), l * d, r, spec)?;
        let k = svd.rank;
        let nrm = svd.s.iter().map(|s| s * s).sum::<f64>().sqrt();
        if !(nrm > 0.0) {
            return Err(Error::Invariant(format!("bond {i} has vanishing weight")));
        }
        self.log_norm += nrm.ln();
        let mut svh = svd.vh;
        for (j, s) in svd.s.iter().enumerate() {
            for z in &mut svh[j * r..(j + 1) * r] {
                *z *= s / nrm;
            }
        }
        self.sites[i] = Tensor::from_raw(vec![l, d, k], svd.u);
        let (_, d1, r1) = self.dims(i + 1);
        let next = matmul_rm(&svh, k, r, self.sites[i + 1].data(), d1 * r1);
        self.sites[i + 1] = Tensor::from_raw(vec![k, d1, r1], next);
        Ok(svd.discarded)
    }

    /// Normalized Schmidt coefficients across the bond after site `cut - 1`.
    pub fn schmidt_values(&self, cut: usize) -> Result<Vec<f64>> {
        if cut == 0 || cut >= self.len() {
            return invalid(format!("cut {cut} must lie in 1..{}", self.len()));
        }
        let m = self.canonicalize(CanonicalForm::Mixed(cut - 1))?;
        let (l, d, r) = m.dims(cut - 1);
        let svd = svd_matrix(m.sites[cut - 1].data(), l * d, r, &TruncationSpec::lossless())?;
        let nrm = svd.s.iter().map(|s| s * s).sum::<f64>().sqrt();
        Ok(svd.s.iter().map(|s| s / nrm).collect())
    }

    /// Von Neumann entropy (nats) of the bipartition after site `cut - 1`.
    pub fn entanglement_entropy(&self, cut: usize) -> Result<f64> {
        let s = self.schmidt_values(cut)?;
        Ok(s.iter()
            .map(|x| x * x)
            .filter(|&p| p > 0.0)
            .map(|p| -p * p.ln())
            .sum())
    }

    /// Right-canonical form whose bond indices are Schmidt vectors, together
    /// with the normalized Schmidt coefficients of every internal bond.
    pub fn schmidt_form(&self, spec: &TruncationSpec) -> Result<(Self, Vec<Vec<f64>>, f64)> {
        let mut m = self.canonicalize(CanonicalForm::Left)?;
        let n = m.len();
        let mut spectra = vec![Vec::new(); n.saturating_sub(1)];
        let mut discarded = 0.0;
        for i in (1..n).rev() {
            let (l, d, r) = m.dims(i);
            let svd = svd_matrix(m.sites[i].data(), l, d * r, spec)?;
            let k = svd.rank;
            let nrm = svd.s.iter().map(|s| s * s).sum::<f64>().sqrt();
            if !(nrm > 0.0) {
                return Err(Error::Invariant(format!("bond {i} has vanishing weight")));
            }
            m.log_norm += nrm.ln();
            discarded += svd.discarded;
            let mut us = svd.u;
            for a in 0..l {
                for j in 0..k {
                    us[a * k + j] *= svd.s[j] / nrm;
                }
            }
            m.sites[i] = Tensor::from_raw(vec![k, d, r], svd.vh);
            let (l0, d0, _) = m.dims(i - 1);
            let prev = matmul_rm(m.sites[i - 1].data(), l0 * d0, l, &us, k);
            m.sites[i - 1] = Tensor::from_raw(vec![l0, d0, k], prev);
            spectra[i - 1] = svd.s.iter().map(|s| s / nrm).collect();
        }
        m.normalize_site(0)?;
        m.canonical_form = CanonicalForm::Right;
        Ok((m, spectra, discarded))
    }

    /// `<op>` at every site for a single-site operator `op` (row-major d x d),
    /// for the normalized state.
    pub fn local_expectations(&self, op: &[C64]) -> Result<Vec<C64>> {
        let d = self.physical_dim;
        if op.len() != d * d {
            return invalid("single-site operator has wrong size");
        }
        let mut m = self.canonicalize(CanonicalForm::Right)?;
        let mut out = Vec::with_capacity(m.len());
        for c in 0..m.len() {
            let (l, _, r) = m.dims(c);
            let data = m.sites[c].data();
            let mut acc = ZERO;
            let mut nrm = 0.0;
            for a in 0..l {
                for b in 0..r {
                    for s in 0..d {
                        let bra = data[(a * d + s) * r + b].conj();
                        nrm += bra.norm_sqr();
                        for t in 0..d {
                            acc += bra * op[s * d + t] * data[(a * d + t) * r + b];
                        }
                    }
                }
            }
            out.push(acc / nrm);
            if c + 1 < m.len() {
                m.left_qr(c)?;
            }
        }
        Ok(out)
    }

    /// Applies a two-site gate (row-major d^2 x d^2, site `bond` is the more
    /// significant index) and splits with `spec`. The center ends on
    /// `bond + 1` when `move_right`, otherwise on `bond`.
    pub(crate) fn apply_two_site_gate(
        &mut self,
        bond: usize,
        gate: &[C64],
        spec: &TruncationSpec,
        move_right: bool,
    ) -> Result<f64> {
        let d = self.physical_dim;
        debug_assert_eq!(gate.len(), d * d * d * d);
        match self.center() {
            Some(c) if c == bond || c == bond + 1 => {}
            Some(c) if c > bond + 1 => self.move_center(bond + 1)?,
            _ => self.move_center(bond)?,
        }
        let (l, _, mid) = self.dims(bond);
        let (_, _, r) = self.dims(bond + 1);
        let ab = matmul_rm(self.sites[bond].data(), l * d, mid, self.sites[bond + 1].data(), d * r);
        let dd = d * d;
        let mut theta = vec![ZERO; l * dd * r];
        for a in 0..l {
            for c in 0..r {
                for out_s in 0..dd {
                    let mut acc = ZERO;
                    for in_s in 0..dd {
                        let g = gate[out_s * dd + in_s];
                        if g != ZERO {
                            acc += g * ab[(a * dd + in_s) * r + c];
                        }
                    }
                    theta[(a * dd + out_s) * r + c] = acc;
                }
            }
        }
        let svd = svd_matrix(&theta, l * d, d * r, spec)?;
        let k = svd.rank;
        let nrm = svd.s.iter().map(|s| s * s).sum::<f64>().sqrt();
        if !(nrm > 0.0) {
            return Err(Error::Invariant(format!("gate on bond {bond} annihilated the state")));
        }
        self.log_norm += nrm.ln();
        let (mut u, mut vh) = (svd.u, svd.vh);
        if move_right {
            for j in 0..k {
                for z in &mut vh[j * d * r..(j + 1) * d * r] {
                    *z *= svd.s[j] / nrm;
                }
            }
            self.canonical_form = CanonicalForm::Mixed(bond + 1);
        } else {
            for a in 0..l * d {
                for j in 0..k {
                    u[a * k + j] *= svd.s[j] / nrm;
                }
            }
            self.canonical_form = CanonicalForm::Mixed(bond);
        }
        self.sites[bond] = Tensor::from_raw(vec![l, d, k], u);
        self.sites[bond + 1] = Tensor::from_raw(vec![k, d, r], vh);
        Ok(svd.discarded)
    }

    /// The same state with site order reversed.
    pub(crate) fn reversed(&self) -> Self {
        let sites = self
            .sites
            .iter()
            .rev()
            .map(|t| permute_raw(t.shape(), t.data(), &[2, 1, 0]))
            .collect();
        let form = match self.canonical_form {
            CanonicalForm::None => CanonicalForm::None,
            CanonicalForm::Left => CanonicalForm::Right,
            CanonicalForm::Right => CanonicalForm::Left,
            CanonicalForm::Mixed(c) => CanonicalForm::Mixed(self.len() - 1 - c),
        };
        Self::from_parts(sites, self.physical_dim, form, self.log_norm)
    }

    pub(crate) fn sites_mut(&mut self) -> &mut [Tensor] {
        &mut self.sites
    }

    pub(crate) fn set_log_norm(&mut self, log_norm: f64) {
        self.log_norm = log_norm;
    }

    pub(crate) fn set_canonical_form(&mut self, form: CanonicalForm) {
        self.canonical_form = form;
    }

    /// Writes a binary checkpoint. Layout (little endian): magic `SMPS`,
    /// format version u32, L u64, d u64, form tag u8 and center u64, log_norm
    /// f64, L+1 bond dimensions u64, then every site's amplitudes as (re, im)
    /// f64 pairs in storage order.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        w.write_all(&(self.physical_dim as u64).to_le_bytes())?;
        let (tag, center) = match self.canonical_form {
            CanonicalForm::None => (0u8, 0u64),
            CanonicalForm::Left => (1, 0),
            CanonicalForm::Right => (2, 0),
            CanonicalForm::Mixed(c) => (3, c as u64),
        };
        w.write_all(&[tag])?;
        w.write_all(&center.to_le_bytes())?;
        w.write_all(&self.log_norm.to_le_bytes())?;
        w.write_all(&1u64.to_le_bytes())?;
        for t in &self.sites {
            w.write_all(&(t.shape()[2] as u64).to_le_bytes())?;
        }
        for t in &self.sites {
            for z in t.data() {
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Self> {
        fn u64_of<R: Read>(r: &mut R) -> Result<u64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(u64::from_le_bytes(b))
        }
        fn f64_of<R: Read>(r: &mut R) -> Result<f64> {
            Ok(f64::from_bits(u64_of(r)?))
        }
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return invalid("not an MPS checkpoint");
        }
        let mut v = [0u8; 4];
        r.read_exact(&mut v)?;
        if u32::from_le_bytes(v) != CHECKPOINT_VERSION {
            return invalid("unsupported checkpoint version");
        }
        let len = u64_of(&mut r)? as usize;
        let d = u64_of(&mut r)? as usize;
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)?;
        let center = u64_of(&mut r)? as usize;
        let form = match tag[0] {
            0 => CanonicalForm::None,
            1 => CanonicalForm::Left,
            2 => CanonicalForm::Right,
            3 => CanonicalForm::Mixed(center),
            t => return invalid(format!("unknown canonical form tag {t}")),
        };
        let log_norm = f64_of(&mut r)?;
        let bonds = (0..=len).map(|_| u64_of(&mut r).map(|b| b as usize)).collect::<Result<Vec<_>>>()?;
        let mut sites = Vec::with_capacity(len);
        for j in 0..len {
            let n = bonds[j] * d * bonds[j + 1];
            let mut data = Vec::with_capacity(n);
            for _ in 0..n {
                let re = f64_of(&mut r)?;
                let im = f64_of(&mut r)?;
                data.push(C64::new(re, im));
            }
            sites.push(Tensor::from_vec(vec![bonds[j], d, bonds[j + 1]], data)?);
        }
        let mut m = Self::new(sites, d)?;
        m.canonical_form = form;
        m.log_norm = log_norm;
        Ok(m)
    }
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"SMPS";
const CHECKPOINT_VERSION: u32 = 1;
