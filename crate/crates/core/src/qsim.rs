//! Exact statevector simulation for few-qubit circuits.
//!
//! Basis ordering: index `k` encodes wire 0 as the most significant bit, so
//! on an `n`-qubit register wire `w` owns bit `n - 1 - w` of the index.
//! This convention is used by every readout in the crate.
//!
//! Rotations follow `R_P(θ) = cos(θ/2)·I − i·sin(θ/2)·P` for `P ∈ {X, Y, Z}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_QUBITS: usize = 16;
const NORM_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    RX,
    RY,
    RZ,
    CNOT,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub target: usize,
    pub control: Option<usize>,
    pub angle: Option<f64>,
}

impl Gate {
    pub fn rx(target: usize, angle: f64) -> Self {
        Self::rotation(GateKind::RX, target, angle)
    }

    pub fn ry(target: usize, angle: f64) -> Self {
        Self::rotation(GateKind::RY, target, angle)
    }

    pub fn rz(target: usize, angle: f64) -> Self {
        Self::rotation(GateKind::RZ, target, angle)
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Gate {
            kind: GateKind::CNOT,
            target,
            control: Some(control),
            angle: None,
        }
    }

    /// # Panics
    ///
    /// Panics if `kind` is `CNOT`.
    pub fn rotation(kind: GateKind, target: usize, angle: f64) -> Self {
        assert!(kind != GateKind::CNOT, "CNOT is not a rotation");
        Gate {
            kind,
            target,
            control: None,
            angle: Some(angle),
        }
    }

    /// Checks the gate's own shape and its wires against a register size.
    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        let wire_err = |wire| Error::Wire { wire, n_qubits };
        if self.target >= n_qubits {
            return Err(wire_err(self.target));
        }
        match (self.kind, self.control, self.angle) {
            (GateKind::CNOT, Some(c), None) => {
                if c >= n_qubits {
                    Err(wire_err(c))
                } else if c == self.target {
                    Err(Error::WireList(format!("CNOT control and target are both wire {c}")))
                } else {
                    Ok(())
                }
            }
            (GateKind::CNOT, _, _) => Err(Error::WireList(
                "CNOT needs a control wire and no angle".into(),
            )),
            (_, None, Some(a)) if a.is_finite() => Ok(()),
            (_, None, Some(_)) => Err(Error::Data("rotation angle is not finite".into())),
            _ => Err(Error::WireList(
                "rotation gates take an angle and no control".into(),
            )),
        }
    }

    /// The gate's 2x2 matrix, row-major. `None` for CNOT.
    pub fn matrix(&self) -> Option<[Complex64; 4]> {
        let theta = self.angle?;
        let (s, c) = (theta / 2.0).sin_cos();
        let z = Complex64::new(0.0, 0.0);
        Some(match self.kind {
            GateKind::RX => [
                Complex64::new(c, 0.0),
                Complex64::new(0.0, -s),
                Complex64::new(0.0, -s),
                Complex64::new(c, 0.0),
            ],
            GateKind::RY => [
                Complex64::new(c, 0.0),
                Complex64::new(-s, 0.0),
                Complex64::new(s, 0.0),
                Complex64::new(c, 0.0),
            ],
            GateKind::RZ => [Complex64::new(c, -s), z, z, Complex64::new(c, s)],
            GateKind::CNOT => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Observable {
    PauliZ(usize),
    BasisPvm(Vec<usize>),
}

impl Observable {
    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        match self {
            Observable::PauliZ(w) => check_wire(*w, n_qubits),
            Observable::BasisPvm(wires) => check_wire_subset(wires, n_qubits),
        }
    }
}

fn check_qubits(n_qubits: usize) -> Result<()> {
    if (1..=MAX_QUBITS).contains(&n_qubits) {
        Ok(())
    } else {
        Err(Error::Size(format!(
            "{n_qubits} qubits requested, supported range is 1..={MAX_QUBITS}"
        )))
    }
}

fn check_wire(wire: usize, n_qubits: usize) -> Result<()> {
    if wire < n_qubits {
        Ok(())
    } else {
        Err(Error::Wire { wire, n_qubits })
    }
}

pub(crate) fn check_wire_subset(wires: &[usize], n_qubits: usize) -> Result<()> {
    if wires.is_empty() {
        return Err(Error::WireList("empty wire list".into()));
    }
    for (i, &w) in wires.iter().enumerate() {
        check_wire(w, n_qubits)?;
        if wires[..i].contains(&w) {
            return Err(Error::WireList(format!("wire {w} listed twice")));
        }
    }
    Ok(())
}

/// Normalized amplitudes over the `2^n` computational basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Builds a state from raw amplitudes, checking length and norm.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if !len.is_power_of_two() || len < 2 {
            return Err(Error::Size(format!("{len} amplitudes is not 2^n for n >= 1")));
        }
        let n_qubits = len.trailing_zeros() as usize;
        check_qubits(n_qubits)?;
        let state = StateVector {
            n_qubits,
            amplitudes,
        };
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Data(format!("state norm^2 is {norm}, expected 1")));
        }
        Ok(state)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    #[inline]
    fn mask(&self, wire: usize) -> usize {
        1 << (self.n_qubits - 1 - wire)
    }

    /// Applies `gate` in place.
    pub fn apply_mut(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.apply_unchecked(gate);
        Ok(())
    }

    /// Applies a gate already validated against this register.
    pub(crate) fn apply_unchecked(&mut self, gate: &Gate) {
        let tmask = self.mask(gate.target);
        match gate.kind {
            GateKind::CNOT => {
                let cmask = self.mask(gate.control.expect("validated CNOT"));
                for i in 0..self.amplitudes.len() {
                    if i & cmask != 0 && i & tmask == 0 {
                        self.amplitudes.swap(i, i | tmask);
                    }
                }
            }
            GateKind::RZ => {
                let theta = gate.angle.expect("validated rotation");
                if theta == 0.0 {
                    return;
                }
                let (s, c) = (theta / 2.0).sin_cos();
                let lo = Complex64::new(c, -s);
                let hi = Complex64::new(c, s);
                for (i, a) in self.amplitudes.iter_mut().enumerate() {
                    *a *= if i & tmask == 0 { lo } else { hi };
                }
            }
            GateKind::RX | GateKind::RY => {
                let theta = gate.angle.expect("validated rotation");
                if theta == 0.0 {
                    return;
                }
                let (s, c) = (theta / 2.0).sin_cos();
                let rx = gate.kind == GateKind::RX;
                let dim = self.amplitudes.len();
                let mut base = 0;
                while base < dim {
                    for i in base..base + tmask {
                        let j = i | tmask;
                        let x = self.amplitudes[i];
                        let y = self.amplitudes[j];
                        if rx {
                            // [[c, -is], [-is, c]]
                            self.amplitudes[i] = Complex64::new(c * x.re + s * y.im, c * x.im - s * y.re);
                            self.amplitudes[j] = Complex64::new(s * x.im + c * y.re, c * y.im - s * x.re);
                        } else {
                            self.amplitudes[i] = x * c - y * s;
                            self.amplitudes[j] = x * s + y * c;
                        }
                    }
                    base += 2 * tmask;
                }
            }
        }
    }

    /// Applies an arbitrary 2×2 matrix `[a, b, c, d]` (row-major) to `wire`.
    pub(crate) fn apply_matrix_unchecked(&mut self, wire: usize, m: &[Complex64; 4]) {
        let tmask = self.mask(wire);
        let dim = self.amplitudes.len();
        let mut base = 0;
        while base < dim {
            for i in base..base + tmask {
                let j = i | tmask;
                let x = self.amplitudes[i];
                let y = self.amplitudes[j];
                self.amplitudes[i] = m[0] * x + m[1] * y;
                self.amplitudes[j] = m[2] * x + m[3] * y;
            }
            base += 2 * tmask;
        }
    }

    /// Applies the basis permutation `x ↦ Σ_b bit_b(x)·cols[b]` (a product of
    /// CNOTs), using `buf` as scratch.
    fn apply_linear_permutation(&mut self, cols: &[usize], buf: &mut Vec<Complex64>) {
        let dim = self.amplitudes.len();
        buf.resize(dim, Complex64::new(0.0, 0.0));
        // Walk x in Gray-code order so each step flips one input bit.
        let mut y = 0;
        buf[0] = self.amplitudes[0];
        for g in 1..dim {
            y ^= cols[g.trailing_zeros() as usize];
            buf[y] = self.amplitudes[g ^ (g >> 1)];
        }
        std::mem::swap(&mut self.amplitudes, buf);
    }

    /// Overwrites this state's amplitudes with `other`'s. Both must have the
    /// same qubit count.
    pub(crate) fn copy_from(&mut self, other: &StateVector) {
        debug_assert_eq!(self.n_qubits, other.n_qubits);
        self.amplitudes.copy_from_slice(&other.amplitudes);
    }
}

pub(crate) fn matmul2(g: &[Complex64; 4], m: &[Complex64; 4]) -> [Complex64; 4] {
    [
        g[0] * m[0] + g[1] * m[2],
        g[0] * m[1] + g[1] * m[3],
        g[2] * m[0] + g[3] * m[2],
        g[2] * m[1] + g[3] * m[3],
    ]
}

pub(crate) fn dagger2(m: &[Complex64; 4]) -> [Complex64; 4] {
    [m[0].conj(), m[2].conj(), m[1].conj(), m[3].conj()]
}

/// A basis permutation `x ↦ M·x` over GF(2), the action of a CNOT sequence.
///
/// `cols[b]` is the image of basis bit `b` (bit positions, not wires) and
/// `inv` holds the columns of the inverse map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct LinearMap {
    n: usize,
    cols: [usize; MAX_QUBITS],
    inv: [usize; MAX_QUBITS],
}

impl LinearMap {
    fn identity(n: usize) -> Self {
        let mut cols = [0; MAX_QUBITS];
        for (b, c) in cols.iter_mut().enumerate().take(n) {
            *c = 1 << b;
        }
        LinearMap { n, cols, inv: cols }
    }

    /// Composes `CNOT(cm → tm)` after this map (masks are bit masks).
    fn then_cnot(&mut self, cm: usize, tm: usize) {
        for col in self.cols.iter_mut().take(self.n) {
            if *col & cm != 0 {
                *col ^= tm;
            }
        }
        // (C∘M)⁻¹ = M⁻¹∘C, and C maps basis bit `cm` to `cm | tm`.
        let (cb, tb) = (cm.trailing_zeros() as usize, tm.trailing_zeros() as usize);
        self.inv[cb] ^= self.inv[tb];
    }

    fn map(cols: &[usize], x: usize) -> usize {
        let mut y = 0;
        let mut rest = x;
        while rest != 0 {
            y ^= cols[rest.trailing_zeros() as usize];
            rest &= rest - 1;
        }
        y
    }

    pub(crate) fn inverse_of(&self, y: usize) -> usize {
        LinearMap::map(&self.inv[..self.n], y)
    }

    /// Mask of input bits whose parity gives output bit `b`.
    pub(crate) fn row(&self, b: usize) -> usize {
        (0..self.n).filter(|&j| self.cols[j] >> b & 1 == 1).fold(0, |acc, j| acc | 1 << j)
    }
}

impl StateVector {
    /// Amplitude-level application of a pending [`LinearMap`].
    pub(crate) fn apply_map(&mut self, map: &LinearMap, buf: &mut Vec<Complex64>) {
        self.apply_linear_permutation(&map.cols[..map.n], buf);
    }
}

/// Runs already-validated gates with fewer passes over the amplitudes.
///
/// Single-qubit gates are multiplied into one pending matrix per wire, and
/// consecutive CNOTs are collected into one basis permutation. A wire's
/// pending matrix is flushed before a CNOT touches that wire. The result
/// equals applying the gates one by one, up to rounding.
///
/// With `defer_trailing`, a permutation left pending at the end is returned
/// instead of applied; the true state is then `map(state)`.
pub(crate) fn run_fused<I>(
    state: &mut StateVector,
    gates: I,
    buf: &mut Vec<Complex64>,
    defer_trailing: bool,
) -> Option<LinearMap>
where
    I: IntoIterator<Item = Gate>,
{
    let n = state.n_qubits;
    let mut pending: [Option<[Complex64; 4]>; MAX_QUBITS] = [None; MAX_QUBITS];
    let mut perm: Option<LinearMap> = None;
    for gate in gates {
        match gate.kind {
            GateKind::CNOT => {
                let c = gate.control.expect("validated CNOT");
                let t = gate.target;
                for w in [c, t] {
                    if let Some(m) = pending[w].take() {
                        state.apply_matrix_unchecked(w, &m);
                    }
                }
                perm.get_or_insert_with(|| LinearMap::identity(n))
                    .then_cnot(state.mask(c), state.mask(t));
            }
            _ => {
                if gate.angle == Some(0.0) {
                    continue;
                }
                if let Some(map) = perm.take() {
                    state.apply_map(&map, buf);
                }
                let g = gate.matrix().expect("rotation");
                let w = gate.target;
                pending[w] = Some(match pending[w] {
                    Some(m) => matmul2(&g, &m),
                    None => g,
                });
            }
        }
    }
    // Pending matrices predate any pending permutation and sit on wires it
    // doesn't touch, so the order of these two flushes is free.
    for (w, m) in pending.iter().enumerate().take(n) {
        if let Some(m) = m {
            state.apply_matrix_unchecked(w, m);
        }
    }
    match perm {
        Some(map) if defer_trailing => Some(map),
        Some(map) => {
            state.apply_map(&map, buf);
            None
        }
        None => None,
    }
}

/// `|0…0⟩` on `n_qubits` wires.
pub fn zero_state(n_qubits: usize) -> Result<StateVector> {
    check_qubits(n_qubits)?;
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
    amplitudes[0] = Complex64::new(1.0, 0.0);
    Ok(StateVector {
        n_qubits,
        amplitudes,
    })
}

pub fn apply_gate(state: &StateVector, gate: &Gate) -> Result<StateVector> {
    let mut out = state.clone();
    out.apply_mut(gate)?;
    Ok(out)
}

/// Left-to-right composition of `gates`. A failing gate is reported with its
/// index in the sequence.
pub fn run_circuit(state: &StateVector, gates: &[Gate]) -> Result<StateVector> {
    let mut out = state.clone();
    run_circuit_mut(&mut out, gates)?;
    Ok(out)
}

pub fn run_circuit_mut(state: &mut StateVector, gates: &[Gate]) -> Result<()> {
    for (i, g) in gates.iter().enumerate() {
        g.validate(state.n_qubits).map_err(|e| e.at_gate(i))?;
    }
    for g in gates {
        state.apply_unchecked(g);
    }
    Ok(())
}

/// `⟨Z_wire⟩`: `+1` weight on basis states whose `wire` bit is 0.
pub fn expectation_z(state: &StateVector, wire: usize) -> Result<f64> {
    check_wire(wire, state.n_qubits)?;
    Ok(expectation_z_unchecked(state, wire))
}

pub(crate) fn expectation_z_unchecked(state: &StateVector, wire: usize) -> f64 {
    let mask = state.mask(wire);
    let ev: f64 = state
        .amplitudes
        .iter()
        .enumerate()
        .map(|(i, a)| if i & mask == 0 { a.norm_sqr() } else { -a.norm_sqr() })
        .sum();
    ev.clamp(-1.0, 1.0)
}

/// Marginal probabilities of every bit pattern on `wires`.
///
/// Entry `k` is the probability of reading `k` on the listed wires, with
/// `wires[0]` as the most significant bit of `k`.
pub fn basis_probabilities(state: &StateVector, wires: &[usize]) -> Result<Vec<f64>> {
    check_wire_subset(wires, state.n_qubits)?;
    Ok(basis_probabilities_unchecked(state, wires))
}

pub(crate) fn basis_probabilities_unchecked(state: &StateVector, wires: &[usize]) -> Vec<f64> {
    let n = state.n_qubits;
    let k = wires.len();
    let mut probs = vec![0.0; 1 << k];
    // Fast path: the whole register in natural order.
    if k == n && wires.iter().enumerate().all(|(i, &w)| i == w) {
        for (p, a) in probs.iter_mut().zip(&state.amplitudes) {
            *p = a.norm_sqr();
        }
    } else {
        let masks: Vec<usize> = wires.iter().map(|&w| state.mask(w)).collect();
        for (i, a) in state.amplitudes.iter().enumerate() {
            let mut idx = 0;
            for m in &masks {
                idx = (idx << 1) | usize::from(i & m != 0);
            }
            probs[idx] += a.norm_sqr();
        }
    }
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    probs
}

/// Dense `2^n × 2^n` matrix of a gate sequence, row-major. Test oracle; only
/// registers of up to 4 qubits are accepted.
pub fn dense_unitary_oracle(gates: &[Gate], n_qubits: usize) -> Result<Vec<Vec<Complex64>>> {
    if n_qubits == 0 || n_qubits > 4 {
        return Err(Error::Size(format!(
            "dense oracle supports 1..=4 qubits, got {n_qubits}"
        )));
    }
    let dim = 1usize << n_qubits;
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let identity = |d: usize| -> Vec<Vec<Complex64>> {
        (0..d)
            .map(|r| (0..d).map(|c| if r == c { one } else { zero }).collect())
            .collect()
    };
    let kron = |a: &Vec<Vec<Complex64>>, b: &Vec<Vec<Complex64>>| -> Vec<Vec<Complex64>> {
        let (ra, rb) = (a.len(), b.len());
        let mut out = vec![vec![zero; ra * rb]; ra * rb];
        for i in 0..ra {
            for j in 0..ra {
                for k in 0..rb {
                    for l in 0..rb {
                        out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
                    }
                }
            }
        }
        out
    };
    let matmul = |a: &Vec<Vec<Complex64>>, b: &Vec<Vec<Complex64>>| -> Vec<Vec<Complex64>> {
        let d = a.len();
        let mut out = vec![vec![zero; d]; d];
        for i in 0..d {
            for k in 0..d {
                let aik = a[i][k];
                for j in 0..d {
                    out[i][j] += aik * b[k][j];
                }
            }
        }
        out
    };

    let mut total = identity(dim);
    for (idx, gate) in gates.iter().enumerate() {
        gate.validate(n_qubits).map_err(|e| e.at_gate(idx))?;
        let full = match gate.matrix() {
            Some(m) => {
                // I ⊗ … ⊗ U ⊗ … ⊗ I with wire 0 leftmost.
                let u = vec![vec![m[0], m[1]], vec![m[2], m[3]]];
                let id2 = identity(2);
                let mut acc = vec![vec![one]];
                for w in 0..n_qubits {
                    acc = kron(&acc, if w == gate.target { &u } else { &id2 });
                }
                acc
            }
            None => {
                let c = gate.control.expect("validated CNOT");
                let cbit = 1 << (n_qubits - 1 - c);
                let tbit = 1 << (n_qubits - 1 - gate.target);
                let mut m = vec![vec![zero; dim]; dim];
                for col in 0..dim {
                    let row = if col & cbit != 0 { col ^ tbit } else { col };
                    m[row][col] = one;
                }
                m
            }
        };
        total = matmul(&full, &total);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn basis(n: usize, k: usize) -> StateVector {
        let mut amps = vec![c(0.0, 0.0); 1 << n];
        amps[k] = c(1.0, 0.0);
        StateVector::from_amplitudes(amps).unwrap()
    }

    fn assert_amps(state: &StateVector, expected: &[Complex64], tol: f64) {
        assert_eq!(state.dim(), expected.len());
        for (a, e) in state.amplitudes().iter().zip(expected) {
            assert!((a - e).norm() <= tol, "{a} != {e}");
        }
    }

    #[test]
    fn zero_state_examples() {
        assert_amps(&zero_state(1).unwrap(), &[c(1.0, 0.0), c(0.0, 0.0)], 0.0);
        assert_amps(
            &zero_state(2).unwrap(),
            &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            0.0,
        );
        assert!(matches!(zero_state(17), Err(Error::Size(_))));
        assert!(matches!(zero_state(0), Err(Error::Size(_))));
    }

    #[test]
    fn rx_zero_is_identity() {
        let s = apply_gate(&zero_state(2).unwrap(), &Gate::ry(0, 0.7)).unwrap();
        let t = apply_gate(&s, &Gate::rx(1, 0.0)).unwrap();
        assert_amps(&t, s.amplitudes(), 1e-12);
    }

    #[test]
    fn rx_pi_flips_with_phase() {
        let s = apply_gate(&zero_state(1).unwrap(), &Gate::rx(0, PI)).unwrap();
        assert_amps(&s, &[c(0.0, 0.0), c(0.0, -1.0)], 1e-12);
    }

    #[test]
    fn cnot_truth_table() {
        // |10⟩ is index 2 with wire 0 as the high bit.
        let s = apply_gate(&basis(2, 0b10), &Gate::cnot(0, 1)).unwrap();
        assert_amps(&s, basis(2, 0b11).amplitudes(), 0.0);
        let s = apply_gate(&basis(2, 0b01), &Gate::cnot(0, 1)).unwrap();
        assert_amps(&s, basis(2, 0b01).amplitudes(), 0.0);
    }

    #[test]
    fn invalid_wires_are_rejected() {
        let s = zero_state(2).unwrap();
        assert!(matches!(
            apply_gate(&s, &Gate::rx(2, 0.1)),
            Err(Error::Wire { wire: 2, n_qubits: 2 })
        ));
        assert!(apply_gate(&s, &Gate::cnot(1, 1)).is_err());
        assert!(apply_gate(&s, &Gate::cnot(3, 0)).is_err());
    }

    #[test]
    fn run_circuit_examples() {
        let s = zero_state(1).unwrap();
        assert_eq!(run_circuit(&s, &[]).unwrap(), s);
        let t = run_circuit(&s, &[Gate::ry(0, FRAC_PI_2)]).unwrap();
        assert_amps(&t, &[c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)], 1e-12);
    }

    #[test]
    fn run_circuit_reports_gate_index() {
        let s = zero_state(2).unwrap();
        let err = run_circuit(&s, &[Gate::rx(0, 0.1), Gate::ry(5, 0.2)]).unwrap_err();
        assert!(matches!(err, Error::Gate { index: 1, .. }), "{err:?}");
    }

    #[test]
    fn expectation_examples() {
        let s = zero_state(1).unwrap();
        assert_eq!(expectation_z(&s, 0).unwrap(), 1.0);
        let flipped = apply_gate(&s, &Gate::rx(0, PI)).unwrap();
        assert!((expectation_z(&flipped, 0).unwrap() + 1.0).abs() < 1e-12);
        let plus = apply_gate(&s, &Gate::ry(0, FRAC_PI_2)).unwrap();
        assert!(expectation_z(&plus, 0).unwrap().abs() < 1e-12);
        assert!(expectation_z(&s, 1).is_err());
    }

    #[test]
    fn basis_probability_examples() {
        let s = zero_state(2).unwrap();
        assert_eq!(basis_probabilities(&s, &[0, 1]).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
        let t = apply_gate(&s, &Gate::ry(0, FRAC_PI_2)).unwrap();
        let p = basis_probabilities(&t, &[0]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
        assert!(basis_probabilities(&s, &[]).is_err());
        assert!(basis_probabilities(&s, &[1, 1]).is_err());
    }

    #[test]
    fn basis_probability_wire_order_is_msb_first() {
        // |01⟩: wire 1 set. Reading wires [1, 0] puts wire 1 in the high bit.
        let s = basis(2, 0b01);
        assert_eq!(basis_probabilities(&s, &[1, 0]).unwrap(), vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(basis_probabilities(&s, &[1]).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn dense_oracle_examples() {
        let id = dense_unitary_oracle(&[], 1).unwrap();
        assert_eq!(id, vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]]);

        let theta = 0.83;
        let rz = dense_unitary_oracle(&[Gate::rz(0, theta)], 1).unwrap();
        let e = |x: f64| Complex64::from_polar(1.0, x);
        assert!((rz[0][0] - e(-theta / 2.0)).norm() < 1e-15);
        assert!((rz[1][1] - e(theta / 2.0)).norm() < 1e-15);
        assert_eq!(rz[0][1], c(0.0, 0.0));

        let cx = dense_unitary_oracle(&[Gate::cnot(0, 1)], 2).unwrap();
        let perm = [0, 1, 3, 2];
        for (col, &row) in perm.iter().enumerate() {
            for r in 0..4 {
                let want = if r == row { 1.0 } else { 0.0 };
                assert_eq!(cx[r][col], c(want, 0.0));
            }
        }
        assert!(matches!(dense_unitary_oracle(&[], 5), Err(Error::Size(_))));
    }

    #[test]
    fn from_amplitudes_checks_norm_and_length() {
        assert!(StateVector::from_amplitudes(vec![c(1.0, 0.0); 3]).is_err());
        assert!(StateVector::from_amplitudes(vec![c(1.0, 0.0), c(1.0, 0.0)]).is_err());
        assert!(StateVector::from_amplitudes(vec![c(0.6, 0.0), c(0.0, 0.8)]).is_ok());
    }

    #[test]
    fn fused_runner_matches_gate_by_gate() {
        use rand::Rng as _;
        let mut rng = crate::rng::stream(42, &[]);
        for trial in 0..200 {
            let n = 1 + trial % 6;
            let gates: Vec<Gate> = (0..30)
                .map(|_| {
                    let t = rng.random_range(0..n);
                    match rng.random_range(0..5) {
                        0 if n > 1 => {
                            let c = (t + rng.random_range(1..n)) % n;
                            Gate::cnot(c, t)
                        }
                        1 => Gate::rx(t, rng.random_range(-4.0..4.0)),
                        2 => Gate::ry(t, rng.random_range(-4.0..4.0)),
                        3 => Gate::rz(t, 0.0),
                        _ => Gate::rz(t, rng.random_range(-4.0..4.0)),
                    }
                })
                .collect();
            let mut start = zero_state(n).unwrap();
            start.apply_mut(&Gate::ry(0, 1.1)).unwrap();
            let expected = run_circuit(&start, &gates).unwrap();
            let mut fused = start.clone();
            run_fused(&mut fused, gates.iter().copied(), &mut Vec::new(), false);
            let mut deferred = start.clone();
            let mut buf = Vec::new();
            if let Some(map) = run_fused(&mut deferred, gates.iter().copied(), &mut buf, true) {
                for (y, a) in expected.amplitudes().iter().enumerate() {
                    assert!((deferred.amplitudes()[map.inverse_of(y)] - a).norm() < 1e-12);
                }
                deferred.apply_map(&map, &mut buf);
            }
            assert_amps(&deferred, expected.amplitudes(), 1e-12);
            assert_amps(&fused, expected.amplitudes(), 1e-12);
        }
    }
}
