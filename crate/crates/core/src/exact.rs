//! Dense state-vector reference implementations.
//!
//! Vectors are indexed with site 0 as the most significant bit. Pauli
//! spectra are indexed in base 4 with site 0 as the most significant digit
//! and the local digit `2 z + x` (I = 0, X = 1, Z = 2, Y = 3).

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::evolution::{trotter_layers, XXZModel};
use crate::mpo::MatrixProductOperator;
use crate::mps::MatrixProductState;
use crate::stabilizer::{Pauli, PauliString};
use crate::tensor::{matmul_rm, C64, ONE, ZERO};

pub const MAX_DENSE_SITES: usize = 14;
pub const MAX_SRE_SITES: usize = 10;
const NORM_TOLERANCE: f64 = 1e-8;

fn check_dim(total: Option<usize>, limit: usize, what: &str) -> Result<usize> {
    match total {
        Some(n) if n <= limit => Ok(n),
        _ => invalid(format!("{what} too large for dense evaluation")),
    }
}

/// Number of qubits of a dense vector.
pub fn qubits(v: &[C64]) -> Result<usize> {
    if v.is_empty() || !v.len().is_power_of_two() {
        return invalid(format!("vector length {} is not a power of two", v.len()));
    }
    Ok(v.len().trailing_zeros() as usize)
}

fn check_normalized(v: &[C64]) -> Result<usize> {
    let n = qubits(v)?;
    let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    if (norm - 1.0).abs() > NORM_TOLERANCE {
        return invalid(format!("state has squared norm {norm}, expected 1"));
    }
    Ok(n)
}

pub fn densify(m: &MatrixProductState) -> Result<Vec<C64>> {
    let d = m.physical_dim();
    let total = d.checked_pow(m.len() as u32);
    check_dim(total, 1 << MAX_DENSE_SITES, "state")?;
    let mut v = vec![ONE];
    let mut rows = 1usize;
    for t in m.sites() {
        let (l, r) = (t.shape()[0], t.shape()[2]);
        v = matmul_rm(&v, rows, l, t.data(), d * r);
        rows *= d;
    }
    let scale = m.log_norm().exp();
    Ok(v.into_iter().map(|z| z * scale).collect())
}

/// Dense row-major matrix of an MPO.
pub fn densify_operator(o: &MatrixProductOperator) -> Result<Vec<C64>> {
    let d = o.physical_dim();
    let total = d.checked_pow(o.len() as u32);
    let n = check_dim(total, 1 << 10, "operator")?;
    // acc[(out, in), bond]
    let mut acc = vec![ONE];
    let mut dim = 1usize;
    let mut bond = 1usize;
    for w in o.sites() {
        let (l, r) = (w.shape()[0], w.shape()[3]);
        let wd = w.data();
        let nd = dim * d;
        let mut next = vec![ZERO; nd * nd * r];
        for oi in 0..dim {
            for ii in 0..dim {
                for a in 0..l {
                    let x = acc[(oi * dim + ii) * bond + a];
                    if x == ZERO {
                        continue;
                    }
                    for s in 0..d {
                        for t in 0..d {
                            let base = ((a * d + s) * d + t) * r;
                            let dst = ((oi * d + s) * nd + ii * d + t) * r;
                            for b in 0..r {
                                next[dst + b] += x * wd[base + b];
                            }
                        }
                    }
                }
            }
        }
        acc = next;
        dim = nd;
        bond = r;
    }
    debug_assert_eq!(dim, n);
    let scale = o.log_scale().exp();
    Ok(acc.into_iter().map(|z| z * scale).collect())
}

pub fn product_state_vector(bits: &[usize]) -> Result<Vec<C64>> {
    let len = bits.len();
    check_dim(1usize.checked_shl(len as u32), 1 << MAX_DENSE_SITES, "state")?;
    let mut x = 0usize;
    for &b in bits {
        if b > 1 {
            return invalid(format!("label {b} is not a qubit label"));
        }
        x = (x << 1) | b;
    }
    let mut v = vec![ZERO; 1 << len];
    v[x] = ONE;
    Ok(v)
}

/// Shannon entropy for `k = 1`, otherwise `ln(sum p^k) / (1 - k)`.
fn renyi(probs: impl Iterator<Item = f64>, k: f64) -> f64 {
    if (k - 1.0).abs() < 1e-12 {
        -probs.filter(|&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>()
    } else {
        probs.filter(|&p| p > 0.0).map(|p| p.powf(k)).sum::<f64>().ln() / (1.0 - k)
    }
}

pub fn participation_entropy_exact(v: &[C64], k: f64) -> Result<f64> {
    let n = check_normalized(v)?;
    if n > MAX_DENSE_SITES {
        return invalid("state too large for dense evaluation");
    }
    if !(k > 0.0) {
        return invalid(format!("Renyi index {k} must be positive"));
    }
    Ok(renyi(v.iter().map(|z| z.norm_sqr()), k))
}

/// `<v|P|v>` in a single pass over the vector.
pub fn pauli_expectation(v: &[C64], p: &PauliString) -> Result<f64> {
    let n = qubits(v)?;
    if p.len() != n {
        return Err(Error::DimensionMismatch(format!("Pauli string of length {} for {n} qubits", p.len())));
    }
    let (xmask, zmask) = p.masks();
    let ny = (xmask & zmask).count_ones();
    let mut acc = ZERO;
    for (y, vy) in v.iter().enumerate() {
        let term = v[y ^ xmask].conj() * vy;
        if (y & zmask).count_ones() % 2 == 1 {
            acc -= term;
        } else {
            acc += term;
        }
    }
    Ok((acc * i_pow(ny)).re)
}

fn i_pow(k: u32) -> C64 {
    match k % 4 {
        0 => ONE,
        1 => C64::new(0.0, 1.0),
        2 => -ONE,
        _ => C64::new(0.0, -1.0),
    }
}

fn walsh_hadamard(g: &mut [C64]) {
    let n = g.len();
    let mut h = 1;
    while h < n {
        for start in (0..n).step_by(2 * h) {
            for i in start..start + h {
                let (a, b) = (g[i], g[i + h]);
                g[i] = a + b;
                g[i + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// Places bit `q` of `m` at bit `2 q`.
fn spread_bits(m: usize) -> usize {
    let mut out = 0;
    let mut q = 0;
    while (m >> q) != 0 {
        out |= ((m >> q) & 1) << (2 * q);
        q += 1;
    }
    out
}

/// All `4^L` Pauli expectations, computed with one Walsh-Hadamard transform
/// per X-mask.
pub fn pauli_spectrum(v: &[C64]) -> Result<Vec<f64>> {
    let n = qubits(v)?;
    if n > MAX_SRE_SITES {
        return invalid(format!("Pauli spectrum of {n} qubits is too large"));
    }
    let dim = 1usize << n;
    let mut out = vec![0.0; dim * dim];
    let mut g = vec![ZERO; dim];
    for a in 0..dim {
        for (y, gy) in g.iter_mut().enumerate() {
            *gy = v[y ^ a].conj() * v[y];
        }
        walsh_hadamard(&mut g);
        let sa = spread_bits(a);
        for (b, gb) in g.iter().enumerate() {
            out[sa + 2 * spread_bits(b)] = (gb * i_pow((a & b).count_ones())).re;
        }
    }
    Ok(out)
}

/// Stabilizer Renyi entropy `M_n` in nats, including `n = 1`.
pub fn sre_exact(v: &[C64], n: f64) -> Result<f64> {
    let l = check_normalized(v)?;
    if !(n > 0.0) {
        return invalid(format!("Renyi index {n} must be positive"));
    }
    let spectrum = pauli_spectrum(v)?;
    let norm = (1u64 << l) as f64;
    Ok(renyi(spectrum.iter().map(|e| e * e / norm), n) - l as f64 * std::f64::consts::LN_2)
}

/// `sum over Z-strings of <P>^2 / 2^L`.
pub fn zeta_z_exact(v: &[C64]) -> Result<f64> {
    let l = qubits(v)?;
    let mut p: Vec<C64> = v.iter().map(|z| C64::new(z.norm_sqr(), 0.0)).collect();
    walsh_hadamard(&mut p);
    Ok(p.iter().map(|z| z.re * z.re).sum::<f64>() / (1u64 << l) as f64)
}

/// `2^-L sum_P |<P>|`.
pub fn stabilizer_norm(v: &[C64]) -> Result<f64> {
    let l = check_normalized(v)?;
    Ok(pauli_spectrum(v)?.iter().map(|e| e.abs()).sum::<f64>() / (1u64 << l) as f64)
}

/// `sum_{x != y} |v_x| |v_y|`.
pub fn l1_coherence(v: &[C64]) -> Result<f64> {
    check_normalized(v)?;
    let s: f64 = v.iter().map(|z| z.norm()).sum();
    Ok(s * s - v.iter().map(|z| z.norm_sqr()).sum::<f64>())
}

/// `<Z_j>` for every qubit.
pub fn z_profile(v: &[C64], len: usize) -> Vec<f64> {
    let total: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    (0..len)
        .map(|j| {
            let bit = len - 1 - j;
            v.iter()
                .enumerate()
                .map(|(x, z)| if (x >> bit) & 1 == 0 { z.norm_sqr() } else { -z.norm_sqr() })
                .sum::<f64>()
                / total
        })
        .collect()
}

/// Applies a single-qubit gate (row-major 2 x 2) to `site`.
pub fn apply_one_qubit(v: &mut [C64], site: usize, u: &[C64; 4]) -> Result<()> {
    let n = qubits(v)?;
    if site >= n {
        return invalid(format!("site {site} outside {n} qubits"));
    }
    let bit = 1usize << (n - 1 - site);
    for x in 0..v.len() {
        if x & bit == 0 {
            let (a, b) = (v[x], v[x | bit]);
            v[x] = u[0] * a + u[1] * b;
            v[x | bit] = u[2] * a + u[3] * b;
        }
    }
    Ok(())
}

/// Applies a two-qubit gate (row-major 4 x 4, `first` most significant).
pub fn apply_two_qubit(v: &mut [C64], first: usize, second: usize, g: &[C64; 16]) -> Result<()> {
    let n = qubits(v)?;
    if first >= n || second >= n || first == second {
        return invalid(format!("sites ({first}, {second}) invalid for {n} qubits"));
    }
    let (b1, b2) = (1usize << (n - 1 - first), 1usize << (n - 1 - second));
    for x in 0..v.len() {
        if x & (b1 | b2) == 0 {
            let idx = [x, x | b2, x | b1, x | b1 | b2];
            let old = idx.map(|i| v[i]);
            for (r, &i) in idx.iter().enumerate() {
                v[i] = (0..4).map(|c| g[r * 4 + c] * old[c]).sum();
            }
        }
    }
    Ok(())
}

pub fn hadamard() -> [C64; 4] {
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    [h, h, h, -h]
}

pub fn phase_gate() -> [C64; 4] {
    [ONE, ZERO, ZERO, C64::new(0.0, 1.0)]
}

pub fn cz_gate() -> [C64; 16] {
    let mut g = [ZERO; 16];
    g[0] = ONE;
    g[5] = ONE;
    g[10] = ONE;
    g[15] = -ONE;
    g
}

pub fn cnot_gate() -> [C64; 16] {
    let mut g = [ZERO; 16];
    g[0] = ONE;
    g[5] = ONE;
    g[11] = ONE;
    g[14] = ONE;
    g
}

pub fn swap_gate() -> [C64; 16] {
    let mut g = [ZERO; 16];
    g[0] = ONE;
    g[6] = ONE;
    g[9] = ONE;
    g[15] = ONE;
    g
}

fn apply_bond_gate(v: &mut [C64], len: usize, bond: usize, g: &[C64; 16]) {
    let (b1, b2) = (1usize << (len - 1 - bond), 1usize << (len - 2 - bond));
    for x in 0..v.len() {
        if x & (b1 | b2) == 0 {
            let idx = [x, x | b2, x | b1, x | b1 | b2];
            let old = idx.map(|i| v[i]);
            for (r, &i) in idx.iter().enumerate() {
                v[i] = (0..4).map(|c| g[r * 4 + c] * old[c]).sum();
            }
        }
    }
}

/// Trotterized evolution of a dense vector with step `dt_ref`.
pub fn evolve_exact(v: &[C64], model: &XXZModel, t: f64, dt_ref: f64, order: u8) -> Result<Vec<C64>> {
    let n = qubits(v)?;
    if n != model.len || n > MAX_DENSE_SITES {
        return invalid(format!("cannot evolve {n} qubits with a model of {} sites", model.len));
    }
    if !(dt_ref > 0.0) {
        return invalid("reference step must be positive");
    }
    let steps = (t / dt_ref).round() as usize;
    let layers = trotter_layers(model, dt_ref, order)?;
    let mut out = v.to_vec();
    for _ in 0..steps {
        for layer in &layers {
            for (&b, g) in layer.bonds.iter().zip(&layer.gates) {
                apply_bond_gate(&mut out, n, b, g);
            }
        }
    }
    Ok(out)
}

/// Dense Hamiltonian (row-major) assembled from the bond terms.
pub fn hamiltonian_dense(model: &XXZModel) -> Result<Vec<C64>> {
    let n = model.len;
    if n > 10 {
        return invalid("dense Hamiltonian limited to 10 sites");
    }
    let dim = 1usize << n;
    let mut h = vec![ZERO; dim * dim];
    for b in 0..n - 1 {
        let hb = model.bond_hamiltonian(b);
        let (b1, b2) = (1usize << (n - 1 - b), 1usize << (n - 2 - b));
        for x in 0..dim {
            if x & (b1 | b2) == 0 {
                let idx = [x, x | b2, x | b1, x | b1 | b2];
                for r in 0..4 {
                    for c in 0..4 {
                        h[idx[r] * dim + idx[c]] += hb[r * 4 + c];
                    }
                }
            }
        }
    }
    Ok(h)
}

/// `exp(-i H t) v` by full diagonalization, for absolute checks at L <= 10.
pub fn expm_evolve(v: &[C64], model: &XXZModel, t: f64) -> Result<Vec<C64>> {
    let h = hamiltonian_dense(model)?;
    let dim = v.len();
    if dim != h.len().isqrt() {
        return Err(Error::DimensionMismatch("vector and Hamiltonian sizes differ".into()));
    }
    let mat = faer::MatRef::from_row_major_slice(&h, dim, dim);
    let eig = mat.self_adjoint_eigen(faer::Side::Lower).map_err(|e| Error::Factorization {
        rows: dim,
        cols: dim,
        reason: format!("{e:?}"),
    })?;
    let u = eig.U();
    let s = eig.S().column_vector();
    let mut coeff = vec![ZERO; dim];
    for (k, ck) in coeff.iter_mut().enumerate() {
        let mut acc = ZERO;
        for x in 0..dim {
            acc += u[(x, k)].conj() * v[x];
        }
        *ck = acc * C64::from_polar(1.0, -s[k].re * t);
    }
    Ok((0..dim).map(|x| (0..dim).map(|k| u[(x, k)] * coeff[k]).sum()).collect())
}

/// Haar-like random pure state (normalized complex Gaussian).
pub fn random_state(len: usize, rng: &mut impl Rng) -> Vec<C64> {
    let mut v: Vec<C64> = (0..1usize << len)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    normalize(&mut v);
    v
}

/// Random state supported on basis strings with exactly `down` labels 1.
pub fn random_fixed_magnetization_state(len: usize, down: usize, rng: &mut impl Rng) -> Vec<C64> {
    let mut v = vec![ZERO; 1 << len];
    for (x, z) in v.iter_mut().enumerate() {
        if x.count_ones() as usize == down {
            *z = C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        }
    }
    normalize(&mut v);
    v
}

pub fn normalize(v: &mut [C64]) {
    let n: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if n > 0.0 {
        for z in v.iter_mut() {
            *z /= n;
        }
    }
}

/// Random Pauli string of length `len`.
pub fn random_pauli_string(len: usize, rng: &mut impl Rng) -> PauliString {
    let labels = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    PauliString::new((0..len).map(|_| labels[rng.gen_range(0..4)]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::test_util::max_diff;
    use crate::tensor::TruncationSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const LN2: f64 = std::f64::consts::LN_2;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// Dense 2^L matrix of a Pauli string by Kronecker products.
    fn pauli_matrix(p: &PauliString) -> Vec<C64> {
        let mut m = vec![ONE];
        let mut dim = 1;
        for q in p.labels() {
            let s = q.matrix();
            let nd = dim * 2;
            let mut next = vec![ZERO; nd * nd];
            for r in 0..dim {
                for c in 0..dim {
                    for a in 0..2 {
                        for b in 0..2 {
                            next[(r * 2 + a) * nd + c * 2 + b] = m[r * dim + c] * s[a * 2 + b];
                        }
                    }
                }
            }
            m = next;
            dim = nd;
        }
        m
    }

    fn ghz(len: usize) -> Vec<C64> {
        let mut v = product_state_vector(&vec![0; len]).unwrap();
        apply_one_qubit(&mut v, 0, &hadamard()).unwrap();
        for j in 1..len {
            apply_two_qubit(&mut v, 0, j, &cnot_gate()).unwrap();
        }
        v
    }

    #[test]
    fn densify_product_states_are_one_hot() {
        for x in 0..64usize {
            let bits: Vec<usize> = (0..6).map(|j| (x >> (5 - j)) & 1).collect();
            let m = MatrixProductState::from_product_state(&bits, 2).unwrap();
            let v = densify(&m).unwrap();
            assert_eq!(v, product_state_vector(&bits).unwrap());
            assert_eq!(v[x], ONE);
        }
    }

    #[test]
    fn densify_norm_matches_inner() {
        let m = MatrixProductState::random(6, 2, 4, &mut rng(1)).unwrap().with_log_norm(0.25);
        let v = densify(&m).unwrap();
        let n2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        assert!((n2 - m.inner(&m).unwrap().re).abs() < 1e-10);
    }

    #[test]
    fn ghz_construction() {
        let v = ghz(4);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((v[0].re - h).abs() < 1e-15 && (v[15].re - h).abs() < 1e-15);
        let m = MatrixProductState::from_dense(&v, 4, 2, &TruncationSpec::lossless()).unwrap();
        assert!(max_diff(&densify(&m).unwrap(), &v) < 1e-12);
    }

    #[test]
    fn densify_rejects_large_chains() {
        let m = MatrixProductState::from_product_state(&[0; 15], 2).unwrap();
        assert!(densify(&m).is_err());
    }

    #[test]
    fn participation_entropy_anchors() {
        let mut u = vec![C64::new(0.25, 0.0); 16];
        for k in [0.5, 1.0, 2.0, 3.0] {
            assert!((participation_entropy_exact(&u, k).unwrap() - 4.0 * LN2).abs() < 1e-12);
        }
        let b = product_state_vector(&[1, 0, 1]).unwrap();
        assert_eq!(participation_entropy_exact(&b, 2.0).unwrap(), 0.0);
        assert_eq!(participation_entropy_exact(&b, 1.0).unwrap(), 0.0);
        u[0] *= 2.0;
        assert!(participation_entropy_exact(&u, 2.0).is_err());
    }

    #[test]
    fn pauli_expectation_matches_matrix_oracle() {
        let mut r = rng(2);
        let v = random_state(6, &mut r);
        for _ in 0..100 {
            let p = random_pauli_string(6, &mut r);
            let m = pauli_matrix(&p);
            let mv = matmul_rm(&m, 64, 64, &v, 1);
            let want: C64 = v.iter().zip(&mv).map(|(a, b)| a.conj() * b).sum();
            assert!(want.im.abs() < 1e-12);
            assert!((pauli_expectation(&v, &p).unwrap() - want.re).abs() < 1e-10);
        }
    }

    #[test]
    fn pauli_expectation_anchors() {
        let v = random_state(5, &mut rng(3));
        let id = PauliString::new(vec![Pauli::I; 5]);
        assert!((pauli_expectation(&v, &id).unwrap() - 1.0).abs() < 1e-12);
        let zero = product_state_vector(&[0; 5]).unwrap();
        for mask in 0..32usize {
            let p = PauliString::new((0..5).map(|j| if (mask >> j) & 1 == 1 { Pauli::Z } else { Pauli::I }).collect());
            assert_eq!(pauli_expectation(&zero, &p).unwrap(), 1.0);
        }
    }

    #[test]
    fn spectrum_matches_single_pass() {
        let v = random_state(4, &mut rng(4));
        let spec = pauli_spectrum(&v).unwrap();
        for (idx, e) in spec.iter().enumerate() {
            let p = PauliString::from_index(idx, 4);
            assert!((pauli_expectation(&v, &p).unwrap() - e).abs() < 1e-12);
        }
    }

    #[test]
    fn purity_identity() {
        for l in 1..=6 {
            let v = random_state(l, &mut rng(5 + l as u64));
            let s: f64 = pauli_spectrum(&v).unwrap().iter().map(|e| e * e).sum::<f64>() / (1u64 << l) as f64;
            assert!((s - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn sre_anchors() {
        let zero = product_state_vector(&[0; 4]).unwrap();
        assert!(sre_exact(&zero, 2.0).unwrap().abs() < 1e-10);
        assert!(sre_exact(&ghz(5), 2.0).unwrap().abs() < 1e-10);
        assert!(sre_exact(&ghz(5), 1.0).unwrap().abs() < 1e-10);
        let t = std::f64::consts::PI / 8.0;
        let v = vec![C64::new(t.cos(), 0.0), C64::new(t.sin(), 0.0)];
        assert!((sre_exact(&v, 2.0).unwrap() - (4.0f64 / 3.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn coherence_and_stabilizer_norm_anchors() {
        let zero = product_state_vector(&[0; 3]).unwrap();
        assert!((stabilizer_norm(&zero).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(l1_coherence(&zero).unwrap(), 0.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = vec![C64::new(h, 0.0), C64::new(h, 0.0)];
        assert!((stabilizer_norm(&plus).unwrap() - 1.0).abs() < 1e-12);
        assert!((l1_coherence(&plus).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zeta_z_of_bell_pair() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v = vec![ZERO, C64::new(h, 0.0), C64::new(h, 0.0), ZERO];
        assert!((zeta_z_exact(&v).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn evolve_exact_trivial_and_rabi() {
        let model = XXZModel::clean(2, 1.0, 0.0).unwrap();
        let v = product_state_vector(&[1, 0]).unwrap();
        assert_eq!(evolve_exact(&v, &model, 0.0, 0.01, 2).unwrap(), v);
        // |10> -> cos(t/2)|10> - i sin(t/2)|01>, so <Z_0>(t) = -cos(t)
        for t in [0.3, 1.1, 2.5] {
            let w = evolve_exact(&v, &model, t, 0.01, 2).unwrap();
            let z = z_profile(&w, 2);
            assert!((z[0] + t.cos()).abs() < 1e-10);
            let n: f64 = w.iter().map(|z| z.norm_sqr()).sum();
            assert!((n - 1.0).abs() < 1e-10);
            let e = expm_evolve(&v, &model, t).unwrap();
            assert!((z_profile(&e, 2)[0] + t.cos()).abs() < 1e-10);
        }
    }

    #[test]
    fn densify_operator_identity() {
        let id = MatrixProductOperator::identity(3, 2).unwrap();
        let m = densify_operator(&id).unwrap();
        for r in 0..8 {
            for c in 0..8 {
                assert_eq!(m[r * 8 + c], if r == c { ONE } else { ZERO });
            }
        }
    }
}
