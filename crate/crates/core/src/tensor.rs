//! Dense complex tensors and the factorizations used by every network routine.
//!
//! Storage is row-major: the last axis varies fastest. A tensor of shape
//! `(a, b, c)` stores element `[i, j, k]` at offset `(i * b + j) * c + k`.
//! Matrix views of a tensor group a leading block of axes into rows and the
//! remaining axes into columns, which is a free reinterpretation of the buffer.

use faer::linalg::matmul::matmul;
use faer::{Accum, MatMut, MatRef, Par};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub use num_complex::Complex64 as C64;

pub(crate) const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Singular values below this fraction of the largest one are treated as
/// exact zeros and never kept.
const NUMERICAL_ZERO: f64 = 1e-14;

/// Relative closeness under which two singular values count as degenerate.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

impl Tensor {
    pub fn from_vec(shape: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return invalid(format!("tensor shape {shape:?} has a zero dimension"));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::DimensionMismatch(format!(
                "shape {shape:?} needs {expected} entries, got {}",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return invalid("tensor data contains non-finite entries");
        }
        Ok(Self { shape, data })
    }

    pub(crate) fn from_raw(shape: Vec<usize>, data: Vec<C64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self::from_raw(shape.to_vec(), vec![ZERO; n])
    }

    pub fn scalar(value: C64) -> Self {
        Self::from_raw(vec![], vec![value])
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> C64) -> Self {
        let n: usize = shape.iter().product();
        let mut idx = vec![0usize; shape.len()];
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f(&idx));
            for ax in (0..shape.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Self::from_raw(shape.to_vec(), data)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(&[n, n], |ix| if ix[0] == ix[1] { ONE } else { ZERO })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        assert_eq!(idx.len(), self.shape.len(), "index rank mismatch");
        let mut off = 0;
        for (&i, &d) in idx.iter().zip(&self.shape) {
            assert!(i < d, "index {i} out of range for axis of size {d}");
            off = off * d + i;
        }
        self.data[off]
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() || shape.iter().any(|&d| d == 0) {
            return Err(Error::DimensionMismatch(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        Ok(Self::from_raw(shape.to_vec(), self.data))
    }

    /// Reorders axes so that output axis `i` is input axis `axes[i]`.
    pub fn permute(&self, axes: &[usize]) -> Result<Self> {
        let rank = self.shape.len();
        let mut seen = vec![false; rank];
        if axes.len() != rank {
            return invalid(format!("permutation {axes:?} has wrong length for rank {rank}"));
        }
        for &a in axes {
            if a >= rank || seen[a] {
                return invalid(format!("{axes:?} is not a permutation of 0..{rank}"));
            }
            seen[a] = true;
        }
        Ok(permute_raw(&self.shape, &self.data, axes))
    }

    pub fn conj(&self) -> Self {
        Self::from_raw(self.shape.clone(), self.data.iter().map(|z| z.conj()).collect())
    }

    pub fn scale(&self, c: C64) -> Self {
        Self::from_raw(self.shape.clone(), self.data.iter().map(|z| z * c).collect())
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::DimensionMismatch(format!(
                "{:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self::from_raw(self.shape.clone(), data))
    }
}

pub(crate) fn permute_raw(shape: &[usize], data: &[C64], axes: &[usize]) -> Tensor {
    let rank = shape.len();
    let new_shape: Vec<usize> = axes.iter().map(|&a| shape[a]).collect();
    if rank <= 1 || axes.iter().enumerate().all(|(i, &a)| i == a) {
        return Tensor::from_raw(new_shape, data.to_vec());
    }
    let mut strides = vec![1usize; rank];
    for i in (0..rank - 1).rev() {
        strides[i] = strides[i + 1] * shape[i + 1];
    }
    let new_strides: Vec<usize> = axes.iter().map(|&a| strides[a]).collect();
    let last = rank - 1;
    let inner_len = new_shape[last];
    let inner_stride = new_strides[last];
    let mut out = Vec::with_capacity(data.len());
    let mut idx = vec![0usize; rank];
    let mut offset = 0usize;
    for _ in 0..data.len() / inner_len {
        for k in 0..inner_len {
            out.push(data[offset + k * inner_stride]);
        }
        let mut ax = last;
        while ax > 0 {
            ax -= 1;
            idx[ax] += 1;
            offset += new_strides[ax];
            if idx[ax] < new_shape[ax] {
                break;
            }
            offset -= new_strides[ax] * new_shape[ax];
            idx[ax] = 0;
        }
    }
    Tensor::from_raw(new_shape, out)
}

/// Row-major product `a (m x k) * b (k x n)`.
pub(crate) fn matmul_rm(a: &[C64], m: usize, k: usize, b: &[C64], n: usize) -> Vec<C64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut out = vec![ZERO; m * n];
    // A row-major buffer read column-major is the transpose, so C^T = B^T A^T
    // lands in `out` already in row-major order.
    let at = MatRef::from_column_major_slice(a, k, m);
    let bt = MatRef::from_column_major_slice(b, n, k);
    let ct = MatMut::from_column_major_slice_mut(&mut out, n, m);
    matmul(ct, Accum::Replace, bt, at, ONE, Par::Seq);
    out
}

/// Row-major product `a^H * b` with `a` stored as (k x m) and `b` as (k x n).
pub(crate) fn matmul_adj_rm(a: &[C64], k: usize, m: usize, b: &[C64], n: usize) -> Vec<C64> {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    let mut out = vec![ZERO; m * n];
    // C^T = B^T conj(A), with A row-major (k x m) read column-major as A^T.
    let at = MatRef::from_column_major_slice(a, m, k);
    let bt = MatRef::from_column_major_slice(b, n, k);
    let ct = MatMut::from_column_major_slice_mut(&mut out, n, m);
    matmul(ct, Accum::Replace, bt, at.transpose().conjugate(), ONE, Par::Seq);
    out
}

/// Row-major product `a * b^H` with `a` stored as (m x k) and `b` as (n x k).
pub(crate) fn matmul_rm_adj(a: &[C64], m: usize, k: usize, b: &[C64], n: usize) -> Vec<C64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    let mut out = vec![ZERO; m * n];
    // C^T = conj(B) A^T.
    let at = MatRef::from_column_major_slice(a, k, m);
    let bt = MatRef::from_column_major_slice(b, k, n);
    let ct = MatMut::from_column_major_slice_mut(&mut out, n, m);
    matmul(ct, Accum::Replace, bt.transpose().conjugate(), at, ONE, Par::Seq);
    out
}

/// Contracts `a` and `b` over the given `(axis of a, axis of b)` pairs.
///
/// The result carries the unpaired axes of `a` followed by the unpaired axes
/// of `b`, each group in its original order.
pub fn contract(a: &Tensor, b: &Tensor, axis_pairs: &[(usize, usize)]) -> Result<Tensor> {
    let mut used_a = vec![false; a.rank()];
    let mut used_b = vec![false; b.rank()];
    for &(i, j) in axis_pairs {
        if i >= a.rank() || j >= b.rank() {
            return invalid(format!("axis pair ({i}, {j}) out of range"));
        }
        if used_a[i] || used_b[j] {
            return invalid(format!("axis pair ({i}, {j}) repeats an axis"));
        }
        if a.shape[i] != b.shape[j] {
            return Err(Error::DimensionMismatch(format!(
                "axis {i} of a has size {} but axis {j} of b has size {}",
                a.shape[i], b.shape[j]
            )));
        }
        used_a[i] = true;
        used_b[j] = true;
    }
    let free_a: Vec<usize> = (0..a.rank()).filter(|&i| !used_a[i]).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|&j| !used_b[j]).collect();

    let perm_a: Vec<usize> = free_a.iter().copied().chain(axis_pairs.iter().map(|p| p.0)).collect();
    let perm_b: Vec<usize> = axis_pairs.iter().map(|p| p.1).chain(free_b.iter().copied()).collect();
    let pa = permute_raw(&a.shape, &a.data, &perm_a);
    let pb = permute_raw(&b.shape, &b.data, &perm_b);

    let m: usize = free_a.iter().map(|&i| a.shape[i]).product();
    let k: usize = axis_pairs.iter().map(|p| a.shape[p.0]).product();
    let n: usize = free_b.iter().map(|&j| b.shape[j]).product();
    let data = matmul_rm(&pa.data, m, k, &pb.data, n);

    let shape: Vec<usize> = free_a
        .iter()
        .map(|&i| a.shape[i])
        .chain(free_b.iter().map(|&j| b.shape[j]))
        .collect();
    Ok(Tensor::from_raw(shape, data))
}

/// Bond truncation policy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationSpec {
    pub max_rank: usize,
    pub weight_cutoff: f64,
}

impl TruncationSpec {
    pub fn new(max_rank: usize, weight_cutoff: f64) -> Result<Self> {
        let spec = Self {
            max_rank,
            weight_cutoff,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Keeps every numerically nonzero singular value.
    pub fn lossless() -> Self {
        Self {
            max_rank: usize::MAX,
            weight_cutoff: 0.0,
        }
    }

    pub fn with_max_rank(max_rank: usize) -> Self {
        Self {
            max_rank,
            weight_cutoff: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_rank == 0 {
            return invalid("max_rank must be at least 1");
        }
        if !(0.0..1.0).contains(&self.weight_cutoff) {
            return invalid(format!(
                "weight_cutoff must lie in [0, 1), got {}",
                self.weight_cutoff
            ));
        }
        Ok(())
    }

    /// Number of leading singular values to keep and the discarded weight
    /// fraction. `singular_values` must be sorted non-increasing.
    pub fn select(&self, singular_values: &[f64]) -> (usize, f64) {
        let n = singular_values.len();
        if n == 0 {
            return (0, 0.0);
        }
        let total: f64 = singular_values.iter().map(|s| s * s).sum();
        if total <= 0.0 {
            return (1, 0.0);
        }
        let floor = singular_values[0] * NUMERICAL_ZERO;
        let mut rank = singular_values.iter().take_while(|&&s| s > floor).count().max(1);

        if self.weight_cutoff > 0.0 {
            // Smallest rank whose discarded tail stays within the cutoff.
            let mut tail = 0.0;
            let mut r = rank;
            while r > 1 {
                let w = singular_values[r - 1] * singular_values[r - 1];
                if (tail + w) / total > self.weight_cutoff {
                    break;
                }
                tail += w;
                r -= 1;
            }
            rank = r;
        }
        while rank < n && singular_values[rank] > floor {
            let last = singular_values[rank - 1];
            if (last - singular_values[rank]).abs() <= TIE_TOLERANCE * last {
                rank += 1;
            } else {
                break;
            }
        }
        rank = rank.min(self.max_rank).max(1);
        let discarded: f64 = singular_values[rank..]
            .iter()
            .filter(|&&s| s > floor)
            .map(|s| s * s)
            .sum::<f64>()
            / total;
        (rank, discarded.clamp(0.0, 1.0))
    }
}

impl Default for TruncationSpec {
    fn default() -> Self {
        Self {
            max_rank: 256,
            weight_cutoff: 1e-12,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FactorResult {
    pub left_factor: Tensor,
    pub singular_values: Vec<f64>,
    pub right_factor: Tensor,
    pub discarded_weight: f64,
}

/// Truncated SVD of a row-major matrix.
#[derive(Clone, Debug)]
pub(crate) struct MatrixSvd {
    pub u: Vec<C64>,
    pub s: Vec<f64>,
    pub vh: Vec<C64>,
    pub rank: usize,
    pub discarded: f64,
}

/// `data = u * sv` with `u` (rows x rank) isometric and `sv = S V^H`
/// truncated by `spec`. `s` holds every singular value in descending order.
pub(crate) struct RangeFactor {
    pub u: Vec<C64>,
    pub sv: Vec<C64>,
    pub s: Vec<f64>,
    pub rank: usize,
    pub discarded: f64,
}

/// Wide matrices at least this tall are factored through their Gram matrix.
const GRAM_MIN_ROWS: usize = 96;

/// Range factorization of a row-major matrix. Wide inputs go through the
/// eigendecomposition of `data data^H`, which is cheaper than a full SVD; the
/// projection `u u^H data` stays exact even where small singular values lose
/// relative accuracy.
pub(crate) fn range_factor(data: &[C64], rows: usize, cols: usize, spec: &TruncationSpec) -> Result<RangeFactor> {
    if rows < GRAM_MIN_ROWS || cols < 2 * rows {
        let svd = svd_matrix(data, rows, cols, spec)?;
        let mut sv = svd.vh;
        for (j, s) in svd.s.iter().take(svd.rank).enumerate() {
            for z in &mut sv[j * cols..(j + 1) * cols] {
                *z *= s;
            }
        }
        return Ok(RangeFactor {
            u: svd.u,
            sv,
            s: svd.s,
            rank: svd.rank,
            discarded: svd.discarded,
        });
    }
    if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Factorization {
            rows,
            cols,
            reason: "non-finite input".into(),
        });
    }
    let gram = matmul_rm_adj(data, rows, cols, data, rows);
    let mat = MatRef::from_row_major_slice(&gram, rows, rows);
    let eig = mat.self_adjoint_eigen(faer::Side::Lower).map_err(|e| Error::Factorization {
        rows,
        cols,
        reason: format!("{e:?}"),
    })?;
    let vals = eig.S().column_vector();
    let vecs = eig.U();
    // faer returns ascending eigenvalues
    let order: Vec<usize> = (0..rows).rev().collect();
    let s: Vec<f64> = order.iter().map(|&i| vals[i].re.max(0.0).sqrt()).collect();
    let (rank, discarded) = spec.select(&s);
    let mut u = vec![ZERO; rows * rank];
    for (j, &col) in order.iter().take(rank).enumerate() {
        for i in 0..rows {
            u[i * rank + j] = vecs[(i, col)];
        }
    }
    let sv = matmul_adj_rm(&u, rows, rank, data, cols);
    Ok(RangeFactor {
        u,
        sv,
        s,
        rank,
        discarded,
    })
}

pub(crate) fn svd_matrix(
    data: &[C64],
    rows: usize,
    cols: usize,
    spec: &TruncationSpec,
) -> Result<MatrixSvd> {
    let fail = |reason: &str| Error::Factorization {
        rows,
        cols,
        reason: reason.to_string(),
    };
    if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(fail("non-finite input"));
    }
    let mat = MatRef::from_row_major_slice(data, rows, cols);
    let svd = mat.thin_svd().map_err(|e| fail(&format!("{e:?}")))?;
    let k = rows.min(cols);
    let s_all: Vec<f64> = (0..k).map(|i| svd.S().column_vector()[i].re.max(0.0)).collect();
    let (rank, discarded) = spec.select(&s_all);
    let u_m = svd.U();
    let v_m = svd.V();

    let mut u = vec![ZERO; rows * rank];
    let mut vh = vec![ZERO; rank * cols];
    for j in 0..rank {
        // Largest-magnitude entry of each left vector is made real-positive.
        let mut best = 0usize;
        let mut best_abs = -1.0;
        for i in 0..rows {
            let a = u_m[(i, j)].norm();
            if a > best_abs * (1.0 + 1e-12) {
                best_abs = a;
                best = i;
            }
        }
        let pivot = u_m[(best, j)];
        let phase = if pivot.norm() > 0.0 {
            pivot.conj() / pivot.norm()
        } else {
            ONE
        };
        for i in 0..rows {
            u[i * rank + j] = u_m[(i, j)] * phase;
        }
        let back = phase.conj();
        for c in 0..cols {
            vh[j * cols + c] = v_m[(c, j)].conj() * back;
        }
    }
    let s = s_all[..rank].to_vec();
    if u.iter().chain(vh.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(fail("non-finite factors"));
    }
    Ok(MatrixSvd {
        u,
        s,
        vh,
        rank,
        discarded,
    })
}

/// Thin QR of a row-major matrix with R's diagonal made real non-negative.
/// Returns `(q, r, k)` with `q` of shape (rows x k) and `r` of shape (k x cols).
pub(crate) fn qr_matrix(data: &[C64], rows: usize, cols: usize) -> Result<(Vec<C64>, Vec<C64>, usize)> {
    if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Factorization {
            rows,
            cols,
            reason: "non-finite input".into(),
        });
    }
    let mat = MatRef::from_row_major_slice(data, rows, cols);
    let qr = mat.qr();
    let k = rows.min(cols);
    let q_m = qr.compute_thin_Q();
    let r_m = qr.thin_R();
    let mut q = vec![ZERO; rows * k];
    let mut r = vec![ZERO; k * cols];
    for j in 0..k {
        let d = r_m[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for i in 0..rows {
            q[i * k + j] = q_m[(i, j)] * phase;
        }
        let back = phase.conj();
        for c in j..cols {
            r[j * cols + c] = r_m[(j, c)] * back;
        }
    }
    Ok((q, r, k))
}

fn split_dims(t: &Tensor, left_axes: &[usize]) -> Result<(Tensor, Vec<usize>, Vec<usize>)> {
    let rank = t.rank();
    let mut is_left = vec![false; rank];
    for &a in left_axes {
        if a >= rank || is_left[a] {
            return invalid(format!("bad split {left_axes:?} for rank {rank}"));
        }
        is_left[a] = true;
    }
    let right_axes: Vec<usize> = (0..rank).filter(|&a| !is_left[a]).collect();
    if left_axes.is_empty() || right_axes.is_empty() {
        return invalid("split must leave both groups non-empty");
    }
    let perm: Vec<usize> = left_axes.iter().copied().chain(right_axes.iter().copied()).collect();
    let p = t.permute(&perm)?;
    let ldims = left_axes.iter().map(|&a| t.shape[a]).collect();
    let rdims = right_axes.iter().map(|&a| t.shape[a]).collect();
    Ok((p, ldims, rdims))
}

/// Truncated SVD with axes `left_axes` as rows and the remaining axes (in
/// order) as columns. The left factor has shape `(left dims.., r)`, the right
/// factor `(r, right dims..)`.
pub fn svd_truncate(t: &Tensor, left_axes: &[usize], spec: &TruncationSpec) -> Result<FactorResult> {
    spec.validate()?;
    let (p, ldims, rdims) = split_dims(t, left_axes)?;
    let rows: usize = ldims.iter().product();
    let cols: usize = rdims.iter().product();
    let svd = svd_matrix(&p.data, rows, cols, spec)?;
    let mut lshape = ldims;
    lshape.push(svd.rank);
    let mut rshape = vec![svd.rank];
    rshape.extend(rdims);
    Ok(FactorResult {
        left_factor: Tensor::from_raw(lshape, svd.u),
        singular_values: svd.s,
        right_factor: Tensor::from_raw(rshape, svd.vh),
        discarded_weight: svd.discarded,
    })
}

/// QR factorization over the split: the first factor is an isometry from the
/// new bond onto the left axes, the second carries the rest.
pub fn qr_orthonormalize(t: &Tensor, left_axes: &[usize]) -> Result<(Tensor, Tensor)> {
    let (p, ldims, rdims) = split_dims(t, left_axes)?;
    let rows: usize = ldims.iter().product();
    let cols: usize = rdims.iter().product();
    let (q, r, k) = qr_matrix(&p.data, rows, cols)?;
    let mut qshape = ldims;
    qshape.push(k);
    let mut rshape = vec![k];
    rshape.extend(rdims);
    Ok((Tensor::from_raw(qshape, q), Tensor::from_raw(rshape, r)))
}

#[cfg(test)]
pub(crate) mod test_util {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    pub fn random_tensor(shape: &[usize], rng: &mut impl Rng) -> Tensor {
        Tensor::from_fn(shape, |_| {
            C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
        })
    }

    pub fn max_diff(a: &[C64], b: &[C64]) -> f64 {
        assert_eq!(a.len(), b.len());
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    /// Dense `m x m` inverse by Gauss-Jordan elimination with partial pivoting.
    pub fn invert(m: &Tensor) -> Tensor {
        let n = m.shape()[0];
        let mut a: Vec<C64> = m.data().to_vec();
        let mut inv: Vec<C64> = Tensor::identity(n).into_data();
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| a[i * n + col].norm().total_cmp(&a[j * n + col].norm())).unwrap();
            for c in 0..n {
                a.swap(col * n + c, piv * n + c);
                inv.swap(col * n + c, piv * n + c);
            }
            let d = a[col * n + col];
            for c in 0..n {
                a[col * n + c] /= d;
                inv[col * n + c] /= d;
            }
            for r in 0..n {
                if r != col {
                    let f = a[r * n + col];
                    for c in 0..n {
                        let (ac, ic) = (a[col * n + c], inv[col * n + c]);
                        a[r * n + c] -= f * ac;
                        inv[r * n + c] -= f * ic;
                    }
                }
            }
        }
        Tensor::from_raw(vec![n, n], inv)
    }
}
