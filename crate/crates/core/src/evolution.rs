//! XXZ chain with on-site fields, Trotterized real-time evolution.
//!
//! Spin operators are `S = sigma / 2`. The bond Hamiltonian between sites
//! `i` and `i + 1` carries the exchange terms plus a share of each site's
//! field: half for interior sites, all of it for the two chain ends.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mps::MatrixProductState;
use crate::tensor::{TruncationSpec, C64, ZERO};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XXZModel {
    pub len: usize,
    pub j: f64,
    pub jz: f64,
    pub fields: Vec<f64>,
}

impl XXZModel {
    pub fn new(len: usize, j: f64, jz: f64, fields: Vec<f64>) -> Result<Self> {
        if len < 2 {
            return invalid(format!("chain length {len} must be at least 2"));
        }
        if fields.len() != len {
            return invalid(format!("{} fields for {len} sites", fields.len()));
        }
        if !j.is_finite() || !jz.is_finite() || fields.iter().any(|h| !h.is_finite()) {
            return invalid("couplings and fields must be finite");
        }
        Ok(Self { len, j, jz, fields })
    }

    pub fn clean(len: usize, j: f64, jz: f64) -> Result<Self> {
        Self::new(len, j, jz, vec![0.0; len])
    }

    /// Field weights `(a, b)` with which the bond `(bond, bond + 1)` carries
    /// the fields of its left and right site.
    fn field_shares(&self, bond: usize) -> (f64, f64) {
        let a = if bond == 0 { 1.0 } else { 0.5 };
        let b = if bond + 2 == self.len { 1.0 } else { 0.5 };
        (a, b)
    }

    /// Two-site bond Hamiltonian, row-major 4 x 4 in the basis
    /// `|00>, |01>, |10>, |11>` with the left site most significant.
    pub fn bond_hamiltonian(&self, bond: usize) -> [C64; 16] {
        let (e00, e11, e01, e10, off) = self.bond_blocks(bond);
        let mut h = [ZERO; 16];
        h[0] = C64::new(e00, 0.0);
        h[5] = C64::new(e01, 0.0);
        h[10] = C64::new(e10, 0.0);
        h[15] = C64::new(e11, 0.0);
        h[6] = C64::new(off, 0.0);
        h[9] = C64::new(off, 0.0);
        h
    }

    fn bond_blocks(&self, bond: usize) -> (f64, f64, f64, f64, f64) {
        let (a, b) = self.field_shares(bond);
        let (hi, hj) = (a * self.fields[bond], b * self.fields[bond + 1]);
        let zz = self.jz / 4.0;
        (
            zz + (hi + hj) / 2.0,
            zz - (hi + hj) / 2.0,
            -zz + (hi - hj) / 2.0,
            -zz - (hi - hj) / 2.0,
            self.j / 2.0,
        )
    }

    /// `exp(-i h_bond tau)` in closed form.
    pub fn bond_gate(&self, bond: usize, tau: f64) -> [C64; 16] {
        let (e00, e11, e01, e10, off) = self.bond_blocks(bond);
        let phase = |e: f64| C64::from_polar(1.0, -e * tau);
        let mut g = [ZERO; 16];
        g[0] = phase(e00);
        g[15] = phase(e11);
        let mu = (e01 + e10) / 2.0;
        let delta = (e01 - e10) / 2.0;
        let omega = (delta * delta + off * off).sqrt();
        let (c, s) = ((omega * tau).cos(), (omega * tau).sin());
        let (nz, nx) = if omega > 0.0 { (delta / omega, off / omega) } else { (0.0, 0.0) };
        let global = phase(mu);
        let i = C64::new(0.0, 1.0);
        g[5] = global * (c - i * s * nz);
        g[10] = global * (c + i * s * nz);
        g[6] = global * (-i * s * nx);
        g[9] = g[6];
        g
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrotterSchedule {
    pub dt: f64,
    pub order: u8,
    pub t_max: f64,
    pub measure_every: usize,
}

impl Default for TrotterSchedule {
    fn default() -> Self {
        Self {
            dt: 0.05,
            order: 2,
            t_max: 10.0,
            measure_every: 10,
        }
    }
}

impl TrotterSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return invalid(format!("time step {} must be positive", self.dt));
        }
        if !(self.t_max >= self.dt) {
            return invalid(format!("t_max {} must be at least dt {}", self.t_max, self.dt));
        }
        if self.order != 1 && self.order != 2 {
            return invalid(format!("Trotter order {} must be 1 or 2", self.order));
        }
        if self.measure_every == 0 {
            return invalid("measure_every must be positive");
        }
        Ok(())
    }

    /// Number of steps, with `t_max` rounded to the nearest multiple of `dt`.
    pub fn steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    pub strength: f64,
    pub realizations: usize,
    pub seed: u64,
}

impl DisorderSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.strength >= 0.0) || !self.strength.is_finite() {
            return invalid(format!("disorder strength {} must be non-negative", self.strength));
        }
        if self.realizations == 0 {
            return invalid("need at least one disorder realization");
        }
        Ok(())
    }

    /// Fields `h_i` uniform in `[-h, h]`. Each realization reads its own
    /// stream of a generator keyed by the seed.
    pub fn fields(&self, len: usize, realization: usize) -> Vec<f64> {
        if self.strength == 0.0 {
            return vec![0.0; len];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(realization as u64);
        let dist = Uniform::new_inclusive(-self.strength, self.strength);
        (0..len).map(|_| dist.sample(&mut rng)).collect()
    }
}

/// Basis labels of the domain wall: left half down (label 1), right half up.
pub fn domain_wall_bits(len: usize) -> Result<Vec<usize>> {
    if len == 0 || len % 2 != 0 {
        return invalid(format!("domain wall needs an even chain length, got {len}"));
    }
    Ok((0..len).map(|j| usize::from(j < len / 2)).collect())
}

pub fn domain_wall_state(len: usize) -> Result<MatrixProductState> {
    MatrixProductState::from_product_state(&domain_wall_bits(len)?, 2)
}

/// Gates on bonds of one parity, applied in the listed order.
#[derive(Clone, Debug)]
pub struct GateLayer {
    pub bonds: Vec<usize>,
    pub gates: Vec<[C64; 16]>,
    pub left_to_right: bool,
}

fn layer(model: &XXZModel, parity: usize, tau: f64, left_to_right: bool) -> GateLayer {
    let mut bonds: Vec<usize> = (parity..model.len - 1).step_by(2).collect();
    if !left_to_right {
        bonds.reverse();
    }
    let gates = bonds.iter().map(|&b| model.bond_gate(b, tau)).collect();
    GateLayer {
        bonds,
        gates,
        left_to_right,
    }
}

/// Layers of one Trotter step. Order 1 is even bonds then odd bonds; order 2
/// is the symmetric even(dt/2) odd(dt) even(dt/2) splitting.
pub fn trotter_layers(model: &XXZModel, dt: f64, order: u8) -> Result<Vec<GateLayer>> {
    match order {
        1 => Ok(vec![layer(model, 0, dt, true), layer(model, 1, dt, false)]),
        2 => Ok(vec![
            layer(model, 0, dt / 2.0, true),
            layer(model, 1, dt, false),
            layer(model, 0, dt / 2.0, true),
        ]),
        o => invalid(format!("Trotter order {o} must be 1 or 2")),
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub time: f64,
    pub step_discarded: f64,
    pub cumulative_discarded: f64,
    pub max_bond: usize,
    /// Set when the bond cap was reached with discarded weight above the alarm level.
    pub truncation_alarm: bool,
}

/// Weight discarded within one step above which a saturated bond raises an alarm.
pub const TRUNCATION_ALARM: f64 = 1e-6;

/// Stepwise TEBD driver that owns its state.
pub struct TrotterEvolver {
    layers: Vec<GateLayer>,
    spec: TruncationSpec,
    state: MatrixProductState,
    dt: f64,
    diag: StepDiagnostics,
}

impl TrotterEvolver {
    pub fn new(
        state: MatrixProductState,
        model: &XXZModel,
        dt: f64,
        order: u8,
        spec: TruncationSpec,
    ) -> Result<Self> {
        spec.validate()?;
        if state.len() != model.len || state.physical_dim() != 2 {
            return invalid(format!(
                "state with {} sites (d = {}) does not fit a chain of {} spins",
                state.len(),
                state.physical_dim(),
                model.len
            ));
        }
        let state = state.normalized()?;
        let max_bond = state.max_bond();
        Ok(Self {
            layers: trotter_layers(model, dt, order)?,
            spec,
            state,
            dt,
            diag: StepDiagnostics {
                max_bond,
                ..Default::default()
            },
        })
    }

    pub fn state(&self) -> &MatrixProductState {
        &self.state
    }

    pub fn into_state(self) -> MatrixProductState {
        self.state
    }

    pub fn time(&self) -> f64 {
        self.diag.time
    }

    pub fn diagnostics(&self) -> &StepDiagnostics {
        &self.diag
    }

    pub fn step(&mut self) -> Result<&StepDiagnostics> {
        let mut discarded = 0.0;
        for layer in &self.layers {
            for (&b, g) in layer.bonds.iter().zip(&layer.gates) {
                discarded += self.state.apply_two_site_gate(b, g, &self.spec, layer.left_to_right)?;
            }
        }
        let max_bond = self.state.max_bond();
        let d = &mut self.diag;
        d.step += 1;
        d.time = d.step as f64 * self.dt;
        d.step_discarded = discarded;
        d.cumulative_discarded += discarded;
        d.max_bond = max_bond;
        d.truncation_alarm = max_bond >= self.spec.max_rank && discarded > TRUNCATION_ALARM;
        if d.truncation_alarm {
            log::warn!(
                "bond cap {} reached at t = {:.3} with discarded weight {:.3e}",
                self.spec.max_rank,
                d.time,
                discarded
            );
        }
        // unitary gates: the scale only drifts by truncation
        self.state.set_log_norm(0.0);
        Ok(&self.diag)
    }
}

/// Evolves `state` to `schedule.t_max`, calling `hook` at `t = 0` and after
/// every `measure_every` steps (and at the final step). Returns the final state.
pub fn evolve<F>(
    state: &MatrixProductState,
    model: &XXZModel,
    schedule: &TrotterSchedule,
    spec: &TruncationSpec,
    mut hook: F,
) -> Result<MatrixProductState>
where
    F: FnMut(f64, &MatrixProductState, &StepDiagnostics) -> Result<()>,
{
    schedule.validate()?;
    let mut ev = TrotterEvolver::new(state.clone(), model, schedule.dt, schedule.order, *spec)?;
    hook(0.0, ev.state(), ev.diagnostics())?;
    let steps = schedule.steps();
    for s in 1..=steps {
        ev.step()?;
        if s % schedule.measure_every == 0 || s == steps {
            hook(ev.time(), ev.state(), ev.diagnostics())?;
        }
    }
    Ok(ev.into_state())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{densify, evolve_exact, expm_evolve, hamiltonian_dense, z_profile};
    use crate::tensor::test_util::max_diff;
    use crate::tensor::{matmul_rm, ONE};

    fn gate_unitarity_error(g: &[C64; 16]) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..4 {
            for c in 0..4 {
                let mut acc = ZERO;
                for k in 0..4 {
                    acc += g[k * 4 + r].conj() * g[k * 4 + c];
                }
                let want = if r == c { ONE } else { ZERO };
                worst = worst.max((acc - want).norm());
            }
        }
        worst
    }

    /// exp(-i H tau) by Taylor series with scaling and squaring.
    fn expm_oracle(h: &[C64; 16], tau: f64) -> Vec<C64> {
        let squarings = 10;
        let scale = tau / f64::from(1 << squarings);
        let a: Vec<C64> = h.iter().map(|z| C64::new(0.0, -scale) * z).collect();
        let mut result = vec![ZERO; 16];
        let mut term = vec![ZERO; 16];
        for i in 0..4 {
            result[i * 5] = ONE;
            term[i * 5] = ONE;
        }
        for k in 1..20 {
            term = matmul_rm(&term, 4, 4, &a, 4).iter().map(|z| z / k as f64).collect();
            for (r, t) in result.iter_mut().zip(&term) {
                *r += t;
            }
        }
        for _ in 0..squarings {
            result = matmul_rm(&result, 4, 4, &result, 4);
        }
        result
    }

    #[test]
    fn xx_gate_is_block_rotation() {
        let m = XXZModel::clean(2, 1.0, 0.0).unwrap();
        let dt = 0.37;
        let g = m.bond_gate(0, dt);
        let (c, s) = ((dt / 2.0).cos(), (dt / 2.0).sin());
        assert!((g[0] - ONE).norm() < 1e-14);
        assert!((g[15] - ONE).norm() < 1e-14);
        assert!((g[5] - C64::new(c, 0.0)).norm() < 1e-14);
        assert!((g[6] - C64::new(0.0, -s)).norm() < 1e-14);
        assert!(max_diff(&g, &expm_oracle(&m.bond_hamiltonian(0), dt)) < 1e-12);
    }

    #[test]
    fn gates_match_matrix_exponential_with_fields() {
        let m = XXZModel::new(4, 1.0, 0.7, vec![0.3, -0.8, 0.5, 0.2]).unwrap();
        for b in 0..3 {
            let g = m.bond_gate(b, 0.21);
            assert!(max_diff(&g, &expm_oracle(&m.bond_hamiltonian(b), 0.21)) < 1e-12);
            assert!(gate_unitarity_error(&g) < 1e-12);
        }
    }

    #[test]
    fn clean_gates_commute_with_zz() {
        let m = XXZModel::clean(3, 1.0, 1.7).unwrap();
        let g = m.bond_gate(0, 0.5);
        let zz = [1.0, -1.0, -1.0, 1.0];
        for r in 0..4 {
            for c in 0..4 {
                let lhs = g[r * 4 + c] * zz[c];
                let rhs = zz[r] * g[r * 4 + c];
                assert!((lhs - rhs).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn bond_terms_sum_to_dense_hamiltonian() {
        let m = XXZModel::new(4, 1.0, 0.6, vec![0.4, -0.1, 0.9, -0.3]).unwrap();
        let h = hamiltonian_dense(&m).unwrap();
        // diagonal of |1100> : Jz/4 (1 - 1 ... ) computed by hand
        let x = 0b1100;
        let sz = [-0.5, -0.5, 0.5, 0.5];
        let mut want = 0.0;
        for i in 0..3 {
            want += 0.6 * sz[i] * sz[i + 1];
        }
        for i in 0..4 {
            want += m.fields[i] * sz[i];
        }
        assert!((h[x * 16 + x].re - want).abs() < 1e-12);
        // hopping between |1100> and |1010>
        assert!((h[0b1100 * 16 + 0b1010].re - 0.5).abs() < 1e-12);
    }

    #[test]
    fn domain_wall_layout() {
        let m = domain_wall_state(4).unwrap();
        assert_eq!(m.amplitude(&[1, 1, 0, 0]).unwrap(), ONE);
        assert_eq!(m.amplitude(&[0, 0, 1, 1]).unwrap(), ZERO);
        let z = z_profile(&densify(&domain_wall_state(8).unwrap()).unwrap(), 8);
        assert!(z.iter().sum::<f64>().abs() < 1e-15);
        assert!(domain_wall_state(5).is_err());
    }

    #[test]
    fn disorder_is_reproducible_and_bounded() {
        let d = DisorderSpec {
            strength: 0.2,
            realizations: 3,
            seed: 11,
        };
        let a = d.fields(16, 1);
        assert_eq!(a, d.fields(16, 1));
        assert_ne!(a, d.fields(16, 2));
        assert!(a.iter().all(|h| h.abs() <= 0.2));
        assert_eq!(DisorderSpec { strength: 0.0, ..d }.fields(4, 0), vec![0.0; 4]);
    }

    fn run(model: &XXZModel, dt: f64, t: f64, spec: TruncationSpec) -> MatrixProductState {
        let sched = TrotterSchedule {
            dt,
            order: 2,
            t_max: t,
            measure_every: 1,
        };
        evolve(&domain_wall_state(model.len).unwrap(), model, &sched, &spec, |_, _, _| Ok(())).unwrap()
    }

    #[test]
    fn profile_matches_dense_reference() {
        let model = XXZModel::clean(8, 1.0, 1.0).unwrap();
        let psi = run(&model, 0.05, 4.0, TruncationSpec::lossless());
        let v0 = densify(&domain_wall_state(8).unwrap()).unwrap();
        let vref = evolve_exact(&v0, &model, 4.0, 0.005, 2).unwrap();
        let zm = z_profile(&densify(&psi).unwrap(), 8);
        let zr = z_profile(&vref, 8);
        for (a, b) in zm.iter().zip(&zr) {
            assert!((a - b).abs() < 5e-3);
        }
        assert!(zm.iter().sum::<f64>().abs() < 1e-8);
        assert!(psi.log_norm().abs() < 1e-8);
    }

    #[test]
    fn second_order_error_scales_quadratically() {
        let model = XXZModel::new(8, 1.0, 1.0, vec![0.1, -0.3, 0.2, 0.0, 0.4, -0.2, 0.1, 0.3]).unwrap();
        let v0 = densify(&domain_wall_state(8).unwrap()).unwrap();
        let exact = expm_evolve(&v0, &model, 2.0).unwrap();
        let err = |dt: f64| {
            let v = evolve_exact(&v0, &model, 2.0, dt, 2).unwrap();
            let (za, zb) = (z_profile(&v, 8), z_profile(&exact, 8));
            za.iter().zip(&zb).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let ratio = err(0.1) / err(0.05);
        assert!((ratio - 4.0).abs() < 0.6, "ratio {ratio}");
    }

    #[test]
    fn backward_evolution_returns_initial_state() {
        let model = XXZModel::clean(8, 1.0, 0.5).unwrap();
        let fwd = run(&model, 0.05, 2.0, TruncationSpec::lossless());
        let back_model = XXZModel::clean(8, -1.0, -0.5).unwrap();
        let mut ev = TrotterEvolver::new(fwd, &back_model, 0.05, 2, TruncationSpec::lossless()).unwrap();
        for _ in 0..40 {
            ev.step().unwrap();
        }
        let f = ev.state().inner(&domain_wall_state(8).unwrap()).unwrap().norm_sqr();
        assert!(f > 1.0 - 1e-6, "fidelity {f}");
    }

    #[test]
    fn hook_sees_initial_and_measured_times() {
        let model = XXZModel::clean(4, 1.0, 1.0).unwrap();
        let sched = TrotterSchedule {
            dt: 0.1,
            order: 2,
            t_max: 1.0,
            measure_every: 4,
        };
        let mut times = Vec::new();
        evolve(&domain_wall_state(4).unwrap(), &model, &sched, &TruncationSpec::lossless(), |t, _, _| {
            times.push(t);
            Ok(())
        })
        .unwrap();
        let want = [0.0, 0.4, 0.8, 1.0];
        assert_eq!(times.len(), want.len());
        assert!(times.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn schedule_validation() {
        let bad = TrotterSchedule {
            dt: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrotterSchedule {
            order: 3,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(XXZModel::new(1, 1.0, 1.0, vec![0.0]).is_err());
        assert!(XXZModel::new(3, 1.0, 1.0, vec![0.0; 2]).is_err());
    }
}
