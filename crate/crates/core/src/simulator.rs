//! Dense statevector simulation of single-qubit and controlled Pauli rotations,
//! Pauli-Z readout and adjoint-mode gradients.
//!
//! Layout is little-endian: qubit `q` is bit `q` of the basis index. A rotation
//! about Pauli axis `P` is `exp(-i θ P / 2)`, so `RZ(θ) = diag(e^{-iθ/2}, e^{iθ/2})`.
//! Controlled rotations act on the target only where the control bit is 1.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest register the dense simulator accepts.
pub const MAX_QUBITS: usize = 12;

type Mat2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn rotation(self, angle: f64) -> Mat2 {
        let (s, c) = (0.5 * angle).sin_cos();
        match self {
            Axis::X => [
                [Complex64::new(c, 0.0), Complex64::new(0.0, -s)],
                [Complex64::new(0.0, -s), Complex64::new(c, 0.0)],
            ],
            Axis::Y => [
                [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
                [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
            ],
            Axis::Z => [
                [Complex64::new(c, -s), ZERO],
                [ZERO, Complex64::new(c, s)],
            ],
        }
    }

    fn pauli(self) -> Mat2 {
        let i = Complex64::new(0.0, 1.0);
        match self {
            Axis::X => [[ZERO, ONE], [ONE, ZERO]],
            Axis::Y => [[ZERO, -i], [i, ZERO]],
            Axis::Z => [[ONE, ZERO], [ZERO, -ONE]],
        }
    }
}

/// Gate kinds of the encoding and variational blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    RX,
    RY,
    RZ,
    CRX,
    CRY,
    CRZ,
}

impl GateKind {
    pub fn axis(self) -> Axis {
        match self {
            GateKind::RX | GateKind::CRX => Axis::X,
            GateKind::RY | GateKind::CRY => Axis::Y,
            GateKind::RZ | GateKind::CRZ => Axis::Z,
        }
    }

    pub fn is_controlled(self) -> bool {
        matches!(self, GateKind::CRX | GateKind::CRY | GateKind::CRZ)
    }

    /// Every kind in this gate set is a (possibly controlled) Pauli rotation,
    /// so each one is differentiable in its angle.
    pub fn is_rotation(self) -> bool {
        true
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// One gate in a circuit. `trainable_slot` is `None` for data-encoding gates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GateOp {
    pub kind: GateKind,
    pub target: usize,
    pub control: Option<usize>,
    pub angle: f64,
    pub trainable_slot: Option<usize>,
}

impl GateOp {
    /// Single-qubit rotation. Panics if `kind` is a controlled kind.
    pub fn rotation(kind: GateKind, target: usize, angle: f64) -> Self {
        assert!(!kind.is_controlled(), "{kind} needs a control qubit");
        Self {
            kind,
            target,
            control: None,
            angle,
            trainable_slot: None,
        }
    }

    /// Controlled rotation. Panics if `kind` is not a controlled kind.
    pub fn controlled(kind: GateKind, control: usize, target: usize, angle: f64) -> Self {
        assert!(kind.is_controlled(), "{kind} takes no control qubit");
        Self {
            kind,
            target,
            control: Some(control),
            angle,
            trainable_slot: None,
        }
    }

    pub fn with_slot(mut self, slot: usize) -> Self {
        self.trainable_slot = Some(slot);
        self
    }

    pub fn inverse(&self) -> Self {
        Self {
            angle: -self.angle,
            ..*self
        }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        if self.target >= n_qubits {
            return Err(Error::Structural(format!(
                "{} target {} outside a {n_qubits}-qubit register",
                self.kind, self.target
            )));
        }
        match (self.kind.is_controlled(), self.control) {
            (true, Some(c)) if c >= n_qubits => Err(Error::Structural(format!(
                "{} control {c} outside a {n_qubits}-qubit register",
                self.kind
            ))),
            (true, Some(c)) if c == self.target => Err(Error::Structural(format!(
                "{} control and target are both qubit {c}",
                self.kind
            ))),
            (true, None) => Err(Error::Structural(format!("{} without control", self.kind))),
            (false, Some(_)) => Err(Error::Structural(format!(
                "{} is not a controlled gate",
                self.kind
            ))),
            _ if !self.angle.is_finite() => Err(Error::Input(format!(
                "{} angle is not finite",
                self.kind
            ))),
            _ => Ok(()),
        }
    }

    fn control_mask(&self) -> usize {
        self.control.map_or(0, |c| 1 << c)
    }

    fn matrix(&self) -> Mat2 {
        self.kind.axis().rotation(self.angle)
    }
}

/// Weighted sum of single-qubit Pauli-Z terms, `Σ_q w_q Z_q`.
#[derive(Clone, Debug, PartialEq)]
pub struct ZSumObservable {
    weights: Vec<f64>,
}

impl ZSumObservable {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::Input(format!("observable weight {i} is not finite")));
        }
        Ok(Self { weights })
    }

    /// `Z` on a single qubit of an `n_qubits` register.
    pub fn single(n_qubits: usize, qubit: usize) -> Self {
        let mut weights = vec![0.0; n_qubits];
        weights[qubit] = 1.0;
        Self { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Diagonal of the observable in the computational basis.
    fn diagonal(&self, n_qubits: usize) -> Vec<f64> {
        (0..1usize << n_qubits)
            .map(|i| {
                self.weights
                    .iter()
                    .enumerate()
                    .map(|(q, w)| if i >> q & 1 == 0 { *w } else { -*w })
                    .sum()
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩` on `n_qubits` qubits, `1 ≤ n_qubits ≤ MAX_QUBITS`.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let mut amplitudes = vec![ZERO; 1 << n_qubits];
        amplitudes[0] = ONE;
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// Wraps raw amplitudes. The length must be a power of two; normalization
    /// is the caller's responsibility.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if !len.is_power_of_two() || len < 2 {
            return Err(Error::Structural(format!(
                "{len} amplitudes is not a power of two ≥ 2"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        check_qubit_count(n_qubits)?;
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn apply(&mut self, gate: &GateOp) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.apply_unchecked(gate);
        Ok(())
    }

    /// Applies gates that were already validated for this register size.
    pub(crate) fn apply_all_unchecked(&mut self, gates: &[GateOp]) {
        for gate in gates {
            self.apply_unchecked(gate);
        }
    }

    pub fn apply_all<'a>(&mut self, gates: impl IntoIterator<Item = &'a GateOp>) -> Result<()> {
        for gate in gates {
            self.apply(gate)?;
        }
        Ok(())
    }

    fn apply_unchecked(&mut self, gate: &GateOp) {
        let m = gate.matrix();
        if gate.kind.axis() == Axis::Z {
            apply_diagonal(&mut self.amplitudes, gate.target, gate.control_mask(), m[0][0], m[1][1]);
        } else {
            apply_mat2(&mut self.amplitudes, gate.target, gate.control_mask(), &m);
        }
    }

    /// `⟨Z_q⟩` of the (assumed normalized) state.
    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        if qubit >= self.n_qubits {
            return Err(Error::Structural(format!(
                "qubit {qubit} outside a {}-qubit register",
                self.n_qubits
            )));
        }
        Ok(self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| if i >> qubit & 1 == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum())
    }

    /// All per-qubit `⟨Z_q⟩` values in one pass over the amplitudes.
    pub fn expectations_z(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_qubits];
        for (i, a) in self.amplitudes.iter().enumerate() {
            let p = a.norm_sqr();
            for (q, e) in out.iter_mut().enumerate() {
                if i >> q & 1 == 0 {
                    *e += p;
                } else {
                    *e -= p;
                }
            }
        }
        out
    }

    pub fn expectation(&self, observable: &ZSumObservable) -> Result<f64> {
        check_observable(observable, self.n_qubits)?;
        let diag = observable.diagonal(self.n_qubits);
        Ok(self
            .amplitudes
            .iter()
            .zip(&diag)
            .map(|(a, d)| a.norm_sqr() * d)
            .sum())
    }
}

/// `|0…0⟩` on `n_qubits` qubits.
pub fn init_zero_state(n_qubits: usize) -> Result<StateVector> {
    StateVector::zero(n_qubits)
}

/// Returns `gate · state`.
pub fn apply_gate(mut state: StateVector, gate: &GateOp) -> Result<StateVector> {
    state.apply(gate)?;
    Ok(state)
}

pub fn expectation_z(state: &StateVector, qubit: usize) -> Result<f64> {
    state.expectation_z(qubit)
}

/// Expectation and gradient with respect to every trainable slot.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjointResult {
    pub expectation: f64,
    /// Indexed by trainable slot; length is one past the largest slot present.
    pub gradient: Vec<f64>,
}

/// Runs `gates` on `|0…0⟩` and differentiates `⟨O⟩` with respect to each
/// trainable angle using one forward and one backward sweep.
///
/// The backward sweep uncomputes the state gate by gate with `U†`, so memory
/// stays at three state vectors regardless of circuit depth.
pub fn adjoint_gradient(
    gates: &[GateOp],
    observable: &ZSumObservable,
    n_qubits: usize,
) -> Result<AdjointResult> {
    let mut psi = StateVector::zero(n_qubits)?;
    check_circuit(gates, n_qubits)?;
    for gate in gates {
        psi.apply_unchecked(gate);
    }
    backward_sweep(psi, gates, observable)
}

/// Backward half of [`adjoint_gradient`]: `final_state` must be the result of
/// running `gates` on `|0…0⟩`.
pub fn backward_sweep(
    final_state: StateVector,
    gates: &[GateOp],
    observable: &ZSumObservable,
) -> Result<AdjointResult> {
    let n_qubits = final_state.n_qubits;
    check_observable(observable, n_qubits)?;
    let n_slots = check_circuit(gates, n_qubits)?;
    let mut gradient = vec![0.0; n_slots];
    let mut psi = final_state;

    let diag = observable.diagonal(n_qubits);
    let mut lambda: Vec<Complex64> = psi
        .amplitudes
        .iter()
        .zip(&diag)
        .map(|(a, d)| a * d)
        .collect();
    let expectation = psi
        .amplitudes
        .iter()
        .zip(&lambda)
        .map(|(a, l)| (a.conj() * l).re)
        .sum();

    if observable.weights.iter().all(|w| *w == 0.0) {
        return Ok(AdjointResult {
            expectation,
            gradient,
        });
    }

    for gate in gates.iter().rev() {
        let inv = gate.inverse();
        psi.apply_unchecked(&inv);
        if let Some(slot) = gate.trainable_slot {
            gradient[slot] += 2.0 * derivative_overlap(&lambda, &psi.amplitudes, gate);
        }
        let m = inv.matrix();
        if gate.kind.axis() == Axis::Z {
            apply_diagonal(&mut lambda, gate.target, gate.control_mask(), m[0][0], m[1][1]);
        } else {
            apply_mat2(&mut lambda, gate.target, gate.control_mask(), &m);
        }
    }

    Ok(AdjointResult {
        expectation,
        gradient,
    })
}

/// Validates every gate and returns the number of trainable slots.
fn check_circuit(gates: &[GateOp], n_qubits: usize) -> Result<usize> {
    let mut n_slots = 0;
    for gate in gates {
        gate.validate(n_qubits)?;
        if let Some(slot) = gate.trainable_slot {
            if !gate.kind.is_rotation() {
                return Err(Error::UnsupportedGate(gate.kind.to_string()));
            }
            n_slots = n_slots.max(slot + 1);
        }
    }
    Ok(n_slots)
}

fn check_qubit_count(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::config(
            "n_qubits",
            format!("{n_qubits} is outside 1..={MAX_QUBITS}"),
        ));
    }
    Ok(())
}

fn check_observable(observable: &ZSumObservable, n_qubits: usize) -> Result<()> {
    if observable.weights.len() != n_qubits {
        return Err(Error::Structural(format!(
            "observable has {} weights for {n_qubits} qubits",
            observable.weights.len()
        )));
    }
    Ok(())
}

/// `Re⟨λ| dU/dθ |ψ⟩` with `dU/dθ = (-i/2) P U(θ)` restricted to the control-1 subspace.
fn derivative_overlap(lambda: &[Complex64], psi: &[Complex64], gate: &GateOp) -> f64 {
    let p = gate.kind.axis().pauli();
    let u = gate.matrix();
    let half_i = Complex64::new(0.0, -0.5);
    let mut d = [[ZERO; 2]; 2];
    for (r, row) in d.iter_mut().enumerate() {
        for (c, entry) in row.iter_mut().enumerate() {
            *entry = half_i * (p[r][0] * u[0][c] + p[r][1] * u[1][c]);
        }
    }
    let tbit = 1usize << gate.target;
    let cmask = gate.control_mask();
    let mut acc = ZERO;
    for_each_pair(psi.len(), tbit, cmask, |i, j| {
        let (a0, a1) = (psi[i], psi[j]);
        let m0 = d[0][0] * a0 + d[0][1] * a1;
        let m1 = d[1][0] * a0 + d[1][1] * a1;
        acc += lambda[i].conj() * m0 + lambda[j].conj() * m1;
    });
    acc.re
}

/// Visits every index pair `(i, i | tbit)` with the target bit clear in `i`
/// and all bits of `cmask` set.
#[inline(always)]
fn for_each_pair(len: usize, tbit: usize, cmask: usize, mut f: impl FnMut(usize, usize)) {
    let low = tbit - 1;
    for k in 0..len / 2 {
        let i = ((k & !low) << 1) | (k & low);
        if i & cmask == cmask {
            f(i, i | tbit);
        }
    }
}

fn apply_mat2(amps: &mut [Complex64], target: usize, cmask: usize, m: &Mat2) {
    for_each_pair(amps.len(), 1 << target, cmask, |i, j| {
        let (a0, a1) = (amps[i], amps[j]);
        amps[i] = m[0][0] * a0 + m[0][1] * a1;
        amps[j] = m[1][0] * a0 + m[1][1] * a1;
    });
}

fn apply_diagonal(amps: &mut [Complex64], target: usize, cmask: usize, d0: Complex64, d1: Complex64) {
    for_each_pair(amps.len(), 1 << target, cmask, |i, j| {
        amps[i] *= d0;
        amps[j] *= d1;
    });
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    const KINDS: [GateKind; 6] = [
        GateKind::RX,
        GateKind::RY,
        GateKind::RZ,
        GateKind::CRX,
        GateKind::CRY,
        GateKind::CRZ,
    ];

    fn random_gate(rng: &mut impl Rng, n: usize) -> GateOp {
        let kind = KINDS[rng.random_range(0..if n > 1 { 6 } else { 3 })];
        let angle = rng.random_range(-2.0 * PI..2.0 * PI);
        let target = rng.random_range(0..n);
        if kind.is_controlled() {
            let mut control = rng.random_range(0..n - 1);
            if control >= target {
                control += 1;
            }
            GateOp::controlled(kind, control, target, angle)
        } else {
            GateOp::rotation(kind, target, angle)
        }
    }

    #[test]
    fn zero_state_layout() {
        let s = init_zero_state(1).unwrap();
        assert_eq!(s.amplitudes(), &[ONE, ZERO]);
        let s = init_zero_state(2).unwrap();
        assert_eq!(s.amplitudes(), &[ONE, ZERO, ZERO, ZERO]);
        assert!(init_zero_state(12).is_ok());
        assert!(matches!(init_zero_state(13), Err(Error::Config { .. })));
        assert!(matches!(init_zero_state(0), Err(Error::Config { .. })));
    }

    #[test]
    fn ry_pi_flips() {
        let s = apply_gate(init_zero_state(1).unwrap(), &GateOp::rotation(GateKind::RY, 0, PI)).unwrap();
        assert_abs_diff_eq!(s.amplitudes()[0].norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.amplitudes()[1].norm(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.expectation_z(0).unwrap(), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn rz_keeps_z_eigenstate() {
        for theta in [-3.0, -0.4, 0.0, 1.1, 2.9] {
            let s = apply_gate(init_zero_state(1).unwrap(), &GateOp::rotation(GateKind::RZ, 0, theta)).unwrap();
            assert_abs_diff_eq!(s.expectation_z(0).unwrap(), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn rz_phase_convention() {
        let mut s = init_zero_state(1).unwrap();
        s.apply(&GateOp::rotation(GateKind::RY, 0, PI / 2.0)).unwrap();
        s.apply(&GateOp::rotation(GateKind::RZ, 0, 0.8)).unwrap();
        let a = s.amplitudes();
        let expected0 = Complex64::from_polar(FRAC_1_SQRT_2, -0.4);
        let expected1 = Complex64::from_polar(FRAC_1_SQRT_2, 0.4);
        assert_abs_diff_eq!((a[0] - expected0).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((a[1] - expected1).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn inactive_control_is_identity() {
        // qubit 1 prepared in a superposition, control qubit 0 left in |0⟩
        let mut s = init_zero_state(2).unwrap();
        s.apply(&GateOp::rotation(GateKind::RY, 1, 0.7)).unwrap();
        let before = s.clone();
        for kind in [GateKind::CRX, GateKind::CRY, GateKind::CRZ] {
            s.apply(&GateOp::controlled(kind, 0, 1, 1.3)).unwrap();
        }
        assert_eq!(s, before);
    }

    #[test]
    fn active_control_rotates_target() {
        let mut s = init_zero_state(2).unwrap();
        s.apply(&GateOp::rotation(GateKind::RY, 0, PI)).unwrap();
        s.apply(&GateOp::controlled(GateKind::CRY, 0, 1, 0.9)).unwrap();
        assert_abs_diff_eq!(s.expectation_z(1).unwrap(), 0.9f64.cos(), epsilon = 1e-14);
    }

    #[test]
    fn expectation_examples() {
        let s = init_zero_state(1).unwrap();
        assert_eq!(s.expectation_z(0).unwrap(), 1.0);
        let theta = 0.37;
        let s = apply_gate(s, &GateOp::rotation(GateKind::RY, 0, theta)).unwrap();
        assert_abs_diff_eq!(s.expectation_z(0).unwrap(), theta.cos(), epsilon = 1e-15);
        let plus = StateVector::from_amplitudes(vec![
            Complex64::new(FRAC_1_SQRT_2, 0.0),
            Complex64::new(FRAC_1_SQRT_2, 0.0),
        ])
        .unwrap();
        assert_abs_diff_eq!(plus.expectation_z(0).unwrap(), 0.0, epsilon = 1e-15);
        assert!(plus.expectation_z(1).is_err());
    }

    #[test]
    fn gate_validation() {
        let mut s = init_zero_state(2).unwrap();
        assert!(matches!(
            s.apply(&GateOp::rotation(GateKind::RX, 2, 0.1)),
            Err(Error::Structural(_))
        ));
        assert!(matches!(
            s.apply(&GateOp::controlled(GateKind::CRX, 1, 1, 0.1)),
            Err(Error::Structural(_))
        ));
        assert!(matches!(
            s.apply(&GateOp::controlled(GateKind::CRZ, 5, 0, 0.1)),
            Err(Error::Structural(_))
        ));
        assert!(s.apply(&GateOp::rotation(GateKind::RX, 0, f64::NAN)).is_err());
    }

    #[test]
    fn norm_and_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=5 {
            let gates: Vec<_> = (0..200).map(|_| random_gate(&mut rng, n)).collect();
            let mut s = init_zero_state(n).unwrap();
            s.apply_all(&gates).unwrap();
            assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
            let snapshot = s.clone();
            for g in &gates[..20] {
                s.apply(g).unwrap();
                s.apply(&g.inverse()).unwrap();
            }
            for (a, b) in s.amplitudes().iter().zip(snapshot.amplitudes()) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn observable_is_linear_in_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 4;
        let mut s = init_zero_state(n).unwrap();
        for _ in 0..60 {
            s.apply(&random_gate(&mut rng, n)).unwrap();
        }
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let direct = s.expectation(&ZSumObservable::new(w.clone()).unwrap()).unwrap();
        let per_qubit: f64 = (0..n).map(|q| w[q] * s.expectation_z(q).unwrap()).sum();
        assert!((direct - per_qubit).abs() < 1e-12);
        let all = s.expectations_z();
        for (q, z) in all.iter().enumerate() {
            assert!((z - s.expectation_z(q).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn adjoint_single_ry() {
        let theta = 0.3;
        let gates = [GateOp::rotation(GateKind::RY, 0, theta).with_slot(0)];
        let r = adjoint_gradient(&gates, &ZSumObservable::single(1, 0), 1).unwrap();
        assert_abs_diff_eq!(r.expectation, theta.cos(), epsilon = 1e-15);
        assert_abs_diff_eq!(r.gradient[0], -theta.sin(), epsilon = 1e-15);
    }

    #[test]
    fn adjoint_zero_observable() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let gates: Vec<_> = (0..30)
            .map(|k| random_gate(&mut rng, 3).with_slot(k))
            .collect();
        let r = adjoint_gradient(&gates, &ZSumObservable::new(vec![0.0; 3]).unwrap(), 3).unwrap();
        assert_eq!(r.expectation, 0.0);
        assert!(r.gradient.iter().all(|g| *g == 0.0));
        assert_eq!(r.gradient.len(), 30);
    }

    #[test]
    fn adjoint_rejects_bad_observable() {
        let gates = [GateOp::rotation(GateKind::RY, 0, 0.1).with_slot(0)];
        assert!(adjoint_gradient(&gates, &ZSumObservable::single(2, 0), 1).is_err());
        assert!(ZSumObservable::new(vec![f64::INFINITY]).is_err());
    }
}
