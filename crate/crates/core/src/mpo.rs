//! Matrix product operators and their application to states.
//!
//! Site tensors have axes `(left bond, out, in, right bond)`.

use crate::error::{invalid, Error, Result};
use crate::mps::{CanonicalForm, MatrixProductState};
use crate::tensor::{
    matmul_adj_rm, matmul_rm, permute_raw, qr_matrix, range_factor, Tensor, TruncationSpec, C64, ONE, ZERO,
};

/// Discarded weight above which the zip-up result is refined by a
/// variational sweep.
const SWEEP_THRESHOLD: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct MatrixProductOperator {
    sites: Vec<Tensor>,
    physical_dim: usize,
    log_scale: f64,
    diagonal: bool,
}

impl MatrixProductOperator {
    pub fn new(sites: Vec<Tensor>, physical_dim: usize) -> Result<Self> {
        if sites.is_empty() {
            return invalid("an MPO needs at least one site");
        }
        let mut prev = 1;
        for (i, t) in sites.iter().enumerate() {
            let s = t.shape();
            if s.len() != 4 || s[1] != physical_dim || s[2] != physical_dim {
                return invalid(format!("MPO site {i} has shape {s:?}"));
            }
            if s[0] != prev {
                return Err(Error::DimensionMismatch(format!("MPO site {i} left bond {} != {prev}", s[0])));
            }
            prev = s[3];
        }
        if prev != 1 {
            return Err(Error::DimensionMismatch("MPO right boundary bond must be 1".into()));
        }
        let diagonal = sites.iter().all(is_diagonal_site);
        Ok(Self {
            sites,
            physical_dim,
            log_scale: 0.0,
            diagonal,
        })
    }

    pub fn identity(len: usize, physical_dim: usize) -> Result<Self> {
        if len == 0 {
            return invalid("identity MPO needs at least one site");
        }
        let site = Tensor::from_fn(&[1, physical_dim, physical_dim, 1], |i| if i[1] == i[2] { ONE } else { ZERO });
        Self::new(vec![site; len], physical_dim)
    }

    /// Diagonal MPO `V` with `V[a, s, s, b] = A[a, s, b]`, carrying the
    /// state's `log_norm` as its scale.
    pub fn diagonal_from_state(state: &MatrixProductState) -> Self {
        let d = state.physical_dim();
        let sites = state
            .sites()
            .iter()
            .map(|a| {
                let (l, r) = (a.shape()[0], a.shape()[2]);
                let src = a.data();
                let mut data = vec![ZERO; l * d * d * r];
                for x in 0..l {
                    for s in 0..d {
                        for y in 0..r {
                            data[((x * d + s) * d + s) * r + y] = src[(x * d + s) * r + y];
                        }
                    }
                }
                Tensor::from_raw(vec![l, d, d, r], data)
            })
            .collect();
        Self {
            sites,
            physical_dim: d,
            log_scale: state.log_norm(),
            diagonal: true,
        }
    }

    pub fn with_log_scale(mut self, log_scale: f64) -> Self {
        self.log_scale = log_scale;
        self
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
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

    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        self.sites[..self.len() - 1].iter().map(|t| t.shape()[3]).collect()
    }

    fn reversed(&self) -> Self {
        Self {
            sites: self
                .sites
                .iter()
                .rev()
                .map(|t| permute_raw(t.shape(), t.data(), &[3, 1, 2, 0]))
                .collect(),
            physical_dim: self.physical_dim,
            log_scale: self.log_scale,
            diagonal: self.diagonal,
        }
    }
}

fn is_diagonal_site(t: &Tensor) -> bool {
    let s = t.shape();
    let (l, d, r) = (s[0], s[1], s[3]);
    let data = t.data();
    (0..l).all(|a| {
        (0..d).all(|o| (0..d).all(|i| o == i || (0..r).all(|b| data[((a * d + o) * d + i) * r + b] == ZERO)))
    })
}

/// Contracts a carry `(c, w * m)` with MPO site `(w, s, t, w')` and state site
/// `(m, t, m')`. Returns the row-major tensor `(c, s, w', m')`.
fn absorb_site(carry: &[C64], c: usize, op: &Tensor, diagonal: bool, site: &Tensor) -> Vec<C64> {
    let (w, d, wr) = (op.shape()[0], op.shape()[1], op.shape()[3]);
    let (m, mr) = (site.shape()[0], site.shape()[2]);
    if diagonal {
        let mut out = vec![ZERO; c * d * wr * mr];
        let sd = site.data();
        let od = op.data();
        for s in 0..d {
            let mut ms = vec![ZERO; m * mr];
            for a in 0..m {
                ms[a * mr..(a + 1) * mr].copy_from_slice(&sd[(a * d + s) * mr..(a * d + s + 1) * mr]);
            }
            let y = matmul_rm(carry, c * w, m, &ms, mr);
            let yp = permute_raw(&[c, w, mr], &y, &[0, 2, 1]);
            let mut ws = vec![ZERO; w * wr];
            for a in 0..w {
                ws[a * wr..(a + 1) * wr].copy_from_slice(&od[((a * d + s) * d + s) * wr..((a * d + s) * d + s + 1) * wr]);
            }
            let z = matmul_rm(yp.data(), c * mr, w, &ws, wr);
            for x in 0..c {
                for y in 0..mr {
                    for b in 0..wr {
                        out[((x * d + s) * wr + b) * mr + y] = z[(x * mr + y) * wr + b];
                    }
                }
            }
        }
        out
    } else {
        let x = matmul_rm(carry, c * w, m, site.data(), d * mr);
        let xp = permute_raw(&[c, w, d, mr], &x, &[0, 3, 1, 2]);
        let wp = permute_raw(op.shape(), op.data(), &[0, 2, 1, 3]);
        let p = matmul_rm(xp.data(), c * mr, w * d, wp.data(), d * wr);
        permute_raw(&[c, mr, d, wr], &p, &[0, 2, 3, 1]).into_data()
    }
}

/// Applies `op` to `state`, truncating with `spec`. Returns the left-canonical
/// result and the summed relative weight discarded by the zip-up sweep.
pub fn apply_mpo(
    op: &MatrixProductOperator,
    state: &MatrixProductState,
    spec: &TruncationSpec,
) -> Result<(MatrixProductState, f64)> {
    spec.validate()?;
    if op.len() != state.len() || op.physical_dim() != state.physical_dim() {
        return Err(Error::DimensionMismatch(format!(
            "MPO of length {} (d = {}) applied to MPS of length {} (d = {})",
            op.len(),
            op.physical_dim(),
            state.len(),
            state.physical_dim()
        )));
    }
    let m = state.canonicalize(CanonicalForm::Right)?;
    let (mut phi, discarded) = zip_up(op, &m, spec)?;
    if discarded > SWEEP_THRESHOLD {
        let back = fit_sweep(&op.reversed(), &m.reversed(), &phi.reversed())?;
        phi = fit_sweep(op, &m, &back.reversed())?;
    }
    let log_norm = phi.log_norm() + m.log_norm() + op.log_scale;
    Ok((phi.with_log_norm(log_norm), discarded))
}

/// Zip-up sweep on a right-canonical state. The returned state has
/// `log_norm` equal to the logarithm of the norm of `op` applied to the unit
/// tensors of `m`, ignoring both scales.
fn zip_up(
    op: &MatrixProductOperator,
    m: &MatrixProductState,
    spec: &TruncationSpec,
) -> Result<(MatrixProductState, f64)> {
    let n = m.len();
    let d = m.physical_dim();
    let mut carry = vec![ONE];
    let mut c = 1usize;
    let mut sites = Vec::with_capacity(n);
    let mut log_norm = 0.0;
    let mut discarded = 0.0;
    for i in 0..n {
        let t = absorb_site(&carry, c, &op.sites[i], op.diagonal, m.site(i));
        let cols = op.sites[i].shape()[3] * m.site(i).shape()[2];
        if i + 1 == n {
            let mut site = Tensor::from_raw(vec![c, d, 1], t);
            let nrm = site.norm();
            if !(nrm > 0.0) {
                return Err(Error::Invariant("MPO application annihilated the state".into()));
            }
            for z in site.data_mut() {
                *z /= nrm;
            }
            log_norm += nrm.ln();
            sites.push(site);
            break;
        }
        let f = range_factor(&t, c * d, cols, spec)?;
        let nrm = f.s.iter().map(|s| s * s).sum::<f64>().sqrt();
        if !(nrm > 0.0) {
            return Err(Error::Invariant("MPO application annihilated the state".into()));
        }
        log_norm += nrm.ln();
        discarded += f.discarded;
        let k = f.rank;
        let mut svh = f.sv;
        for z in &mut svh {
            *z /= nrm;
        }
        sites.push(Tensor::from_raw(vec![c, d, k], f.u));
        carry = svh;
        c = k;
    }
    Ok((MatrixProductState::from_parts(sites, d, CanonicalForm::Left, log_norm), discarded))
}

/// Left environments `E_i` with axes `(phi bond, op bond, m bond)` for
/// `i = 0..len`, where `E_i` covers sites `0..i`.
fn left_envs(
    op: &MatrixProductOperator,
    m: &MatrixProductState,
    phi: &MatrixProductState,
    upto: usize,
) -> Vec<Vec<C64>> {
    let mut envs = Vec::with_capacity(upto + 1);
    envs.push(vec![ONE]);
    for i in 0..upto {
        let env = &envs[i];
        let a = phi.site(i).shape()[0];
        envs.push(extend_env(env, a, op, m, phi, i));
    }
    envs
}

fn extend_env(
    env: &[C64],
    a: usize,
    op: &MatrixProductOperator,
    m: &MatrixProductState,
    phi: &MatrixProductState,
    i: usize,
) -> Vec<C64> {
    let d = m.physical_dim();
    let t = absorb_site(env, a, &op.sites[i], op.diagonal, m.site(i));
    let cols = op.sites[i].shape()[3] * m.site(i).shape()[2];
    let ar = phi.site(i).shape()[2];
    matmul_adj_rm(phi.site(i).data(), a * d, ar, &t, cols)
}

/// One left-to-right variational sweep fitting `phi` to `op |m>`. `phi`
/// must be right-canonical; bond dimensions never grow.
fn fit_sweep(
    op: &MatrixProductOperator,
    m: &MatrixProductState,
    phi: &MatrixProductState,
) -> Result<MatrixProductState> {
    let n = m.len();
    let d = m.physical_dim();
    // right environments from the mirrored network
    let (rop, rm, rphi) = (op.reversed(), m.reversed(), phi.reversed());
    let mirrored = left_envs(&rop, &rm, &rphi, n);
    let right = |i: usize| -> &Vec<C64> { &mirrored[n - i] };
    let mut out = phi.clone();
    let mut env = vec![ONE];
    let mut log_norm = 0.0;
    let mut a = 1usize;
    for i in 0..n {
        let t = absorb_site(&env, a, &op.sites[i], op.diagonal, m.site(i));
        let ar = phi.site(i).shape()[2];
        let cols = op.sites[i].shape()[3] * m.site(i).shape()[2];
        // X[(a s), a'] = sum_{w' m'} T[(a s), (w' m')] R[a', (w' m')]
        let renv_t = permute_raw(&[ar, cols], right(i + 1), &[1, 0]);
        let x = matmul_rm(&t, a * d, cols, renv_t.data(), ar);
        if i + 1 == n {
            let mut site = Tensor::from_raw(vec![a, d, ar], x);
            let nrm = site.norm();
            if !(nrm > 0.0) {
                return Err(Error::Invariant("variational sweep produced a zero tensor".into()));
            }
            for z in site.data_mut() {
                *z /= nrm;
            }
            log_norm += nrm.ln();
            out.sites_mut()[i] = site;
            break;
        }
        let (q, _r, k) = qr_matrix(&x, a * d, ar)?;
        out.sites_mut()[i] = Tensor::from_raw(vec![a, d, k], q);
        env = extend_env(&env, a, op, m, &out, i);
        a = k;
    }
    out.set_canonical_form(CanonicalForm::Left);
    Ok(out.with_log_norm(log_norm))
}
