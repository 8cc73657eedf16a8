//! Parameter-shift gradients, loss-gradient assembly and the optimizer.
//!
//! For a rotation `R_P(θ) = exp(-iθP/2)` any readout `f` that is an
//! expectation value (a Pauli-Z expectation or a single basis-state
//! probability, which is the expectation of a projector) satisfies
//!
//! ```text
//! ∂f/∂θ_j = ½ · [f(θ + (π/2)·e_j) − f(θ − (π/2)·e_j)]
//! ```
//!
//! exactly. [`shift_jacobian`] evaluates every shifted circuit once and reads
//! all requested readouts from it, so a whole batch of readouts on the same
//! input costs `2·param_slots` circuit evaluations.
//!
//! Shifted circuits are not rerun from scratch. Rotations on different wires
//! commute, so within a run of single-qubit gates (a "segment", ended by a
//! CNOT) shifting gate `R(θ)` on wire `w` to `R(θ ± s)` changes the state at
//! the segment's end by the one-wire unitary `A·R(±s)·A†`, where `A` is the
//! product of the later gates on `w` in that segment. Each shifted
//! evaluation therefore starts from a stored end-of-segment state, applies
//! one 2×2 matrix, and runs only the remaining segments. A trailing CNOT
//! ring is never materialized: readouts are taken through its index map.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use num_complex::Complex64;

use crate::qsim::{self, Gate, GateKind, LinearMap, StateVector};
use crate::vqc::{self, CircuitTemplate, ParamVector, ReadoutMode, EPS_FLOOR};

/// A scalar readout of a prepared state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReadoutSelector {
    ExpectationZ(usize),
    /// Probability of reading `pattern` on `wires` (first wire most significant).
    Probability { wires: Vec<usize>, pattern: usize },
}

impl ReadoutSelector {
    fn check(&self, n_qubits: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("invalid readout selector: {msg}")));
        match self {
            ReadoutSelector::ExpectationZ(w) if *w >= n_qubits => {
                bad(format!("wire {w} on {n_qubits} qubits"))
            }
            ReadoutSelector::Probability { wires, pattern } => {
                if let Err(e) = qsim::check_wire_subset(wires, n_qubits) {
                    return bad(e.to_string());
                }
                if *pattern >= 1 << wires.len() {
                    return bad(format!("pattern {pattern} on {} wires", wires.len()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Reads a list of selectors from `map(state)`, where `map` is a deferred
/// CNOT permutation (identity when `None`). Each distinct marginal is
/// computed once.
fn read_all(
    state: &mut StateVector,
    map: Option<LinearMap>,
    selectors: &[ReadoutSelector],
    out: &mut [f64],
    buf: &mut Vec<Complex64>,
) {
    let n = state.n_qubits();
    let natural = |wires: &[usize]| wires.len() == n && wires.iter().enumerate().all(|(i, &w)| i == w);
    // Marginals on wire subsets need the real amplitudes.
    let mut map = map;
    if map.is_some()
        && selectors
            .iter()
            .any(|s| matches!(s, ReadoutSelector::Probability { wires, .. } if !natural(wires)))
    {
        state.apply_map(&map.take().expect("checked"), buf);
    }
    let mut marginals: Vec<(&[usize], Vec<f64>)> = Vec::new();
    for (slot, sel) in out.iter_mut().zip(selectors) {
        *slot = match (sel, &map) {
            (ReadoutSelector::ExpectationZ(w), None) => qsim::expectation_z_unchecked(state, *w),
            (ReadoutSelector::ExpectationZ(w), Some(m)) => {
                let row = m.row(n - 1 - w);
                let value: f64 = state
                    .amplitudes()
                    .iter()
                    .enumerate()
                    .map(|(x, a)| if (x & row).count_ones() % 2 == 0 { a.norm_sqr() } else { -a.norm_sqr() })
                    .sum();
                value.clamp(-1.0, 1.0)
            }
            (ReadoutSelector::Probability { wires, pattern }, m) if natural(wires) => {
                let x = m.as_ref().map_or(*pattern, |m| m.inverse_of(*pattern));
                state.amplitudes()[x].norm_sqr()
            }
            (ReadoutSelector::Probability { wires, pattern }, _) => {
                let idx = match marginals.iter().position(|(w, _)| *w == wires.as_slice()) {
                    Some(i) => i,
                    None => {
                        marginals.push((wires, qsim::basis_probabilities_unchecked(state, wires)));
                        marginals.len() - 1
                    }
                };
                marginals[idx].1[*pattern]
            }
        };
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftRule {
    pub shift: f64,
    pub prefactor: f64,
}

impl Default for ShiftRule {
    fn default() -> Self {
        ShiftRule {
            shift: FRAC_PI_2,
            prefactor: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientVector {
    values: Vec<f64>,
}

impl GradientVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("gradient has non-finite entries".into()));
        }
        Ok(GradientVector { values })
    }

    pub fn zeros(len: usize) -> Self {
        GradientVector {
            values: vec![0.0; len],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs_diff(&self, other: &GradientVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Readout values and their parameter-shift Jacobian at one input.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftJacobian {
    /// Unshifted readouts, one per selector.
    pub values: Vec<f64>,
    /// `rows[s][j] = ∂ readout_s / ∂θ_j`.
    pub rows: Vec<Vec<f64>>,
}

/// Parameter-shift Jacobian of `selectors` at the circuit `encoding ++ layers(params)`.
///
/// Performs exactly `2·param_slots` shifted circuit evaluations; each one is
/// added to `counter` when given.
pub fn shift_jacobian(
    template: &CircuitTemplate,
    params: &ParamVector,
    encoding: &[Gate],
    selectors: &[ReadoutSelector],
    rule: ShiftRule,
    counter: Option<&AtomicUsize>,
) -> Result<ShiftJacobian> {
    let n = template.n_qubits();
    for s in selectors {
        s.check(n)?;
    }
    let layers = template.bind(params)?;
    let gates: Vec<Gate> = encoding.iter().chain(&layers).copied().collect();
    for (i, g) in gates.iter().enumerate() {
        g.validate(n).map_err(|e| e.at_gate(i))?;
    }
    // Gate positions of the parameter slots, in parameter order.
    let mut positions = vec![0; template.param_slots()];
    let mut pos = encoding.len();
    for g in template.gate_plan() {
        match g.slot {
            vqc::Slot::Encoding(_) => continue,
            vqc::Slot::Param(j) => positions[j] = pos,
            vqc::Slot::Fixed => {}
        }
        pos += 1;
    }
    // A segment ends where a CNOT starts (or at the end of the circuit).
    let mut segment_end = vec![gates.len(); gates.len()];
    let mut next = gates.len();
    for i in (0..gates.len()).rev() {
        if gates[i].kind == GateKind::CNOT {
            next = i;
        }
        segment_end[i] = next;
    }
    let ends: Vec<usize> = {
        let mut e: Vec<usize> = positions.iter().map(|&p| segment_end[p]).collect();
        e.sort_unstable();
        e.dedup();
        e
    };

    // Unshifted run, keeping the state at each needed segment end.
    let mut buf = Vec::new();
    let mut state = qsim::zero_state(n)?;
    let mut snapshots: Vec<(usize, StateVector)> = Vec::with_capacity(ends.len());
    let mut done = 0;
    for &e in &ends {
        let _ = qsim::run_fused(&mut state, gates[done..e].iter().copied(), &mut buf, false);
        snapshots.push((e, state.clone()));
        done = e;
    }
    let tail = qsim::run_fused(&mut state, gates[done..].iter().copied(), &mut buf, true);
    let mut values = vec![0.0; selectors.len()];
    read_all(&mut state, tail, selectors, &mut values, &mut buf);

    let mut rows = vec![vec![0.0; template.param_slots()]; selectors.len()];
    let mut scratch = state;
    let mut plus = vec![0.0; selectors.len()];
    let mut minus = vec![0.0; selectors.len()];
    for (j, &p) in positions.iter().enumerate() {
        let e = segment_end[p];
        let snapshot = &snapshots.iter().find(|(end, _)| *end == e).expect("snapshot").1;
        let gate = gates[p];
        // A: later gates on the same wire within the segment.
        let identity = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        ];
        let a = gates[p + 1..e]
            .iter()
            .filter(|g| g.target == gate.target)
            .fold(identity, |acc, g| qsim::matmul2(&g.matrix().expect("rotation"), &acc));
        for (sign, out) in [(1.0, &mut plus), (-1.0, &mut minus)] {
            let shift = Gate::rotation(gate.kind, gate.target, sign * rule.shift)
                .matrix()
                .expect("rotation");
            let v = qsim::matmul2(&qsim::matmul2(&a, &shift), &qsim::dagger2(&a));
            scratch.copy_from(snapshot);
            scratch.apply_matrix_unchecked(gate.target, &v);
            let map = qsim::run_fused(&mut scratch, gates[e..].iter().copied(), &mut buf, true);
            read_all(&mut scratch, map, selectors, out, &mut buf);
            if let Some(c) = counter {
                c.fetch_add(1, Ordering::Relaxed);
            }
        }
        for (s, row) in rows.iter_mut().enumerate() {
            row[j] = rule.prefactor * (plus[s] - minus[s]);
        }
    }
    Ok(ShiftJacobian { values, rows })
}

/// Shift-rule gradient of one readout of the actor circuit on `obs`.
pub fn shift_gradient(
    template: &CircuitTemplate,
    params: &ParamVector,
    obs: &[f64],
    readout: &ReadoutSelector,
) -> Result<GradientVector> {
    shift_gradient_with(template, params, obs, readout, ShiftRule::default(), None)
}

pub fn shift_gradient_with(
    template: &CircuitTemplate,
    params: &ParamVector,
    obs: &[f64],
    readout: &ReadoutSelector,
    rule: ShiftRule,
    counter: Option<&AtomicUsize>,
) -> Result<GradientVector> {
    let encoding = vqc::encode_observation(obs, template.n_qubits())?;
    let jac = shift_jacobian(template, params, &encoding, std::slice::from_ref(readout), rule, counter)?;
    GradientVector::new(jac.rows.into_iter().next().expect("one selector"))
}

/// The readout itself, evaluated directly.
pub fn evaluate_readout(
    template: &CircuitTemplate,
    params: &ParamVector,
    obs: &[f64],
    readout: &ReadoutSelector,
) -> Result<f64> {
    readout.check(template.n_qubits())?;
    let encoding = vqc::encode_observation(obs, template.n_qubits())?;
    let mut state = template.evaluate(params, &encoding)?;
    let mut out = [0.0];
    read_all(&mut state, None, std::slice::from_ref(readout), &mut out, &mut Vec::new());
    Ok(out[0])
}

/// Central differences `[f(θ_j + h) − f(θ_j − h)] / 2h`, one full circuit
/// evaluation per term.
pub fn finite_difference_oracle(
    template: &CircuitTemplate,
    params: &ParamVector,
    obs: &[f64],
    readout: &ReadoutSelector,
    h: f64,
) -> Result<GradientVector> {
    if h <= 0.0 || !h.is_finite() {
        return Err(Error::Config(format!("finite-difference step must be positive, got {h}")));
    }
    let values = (0..params.len())
        .map(|j| {
            let up = evaluate_readout(template, &params.shifted(j, h), obs, readout)?;
            let down = evaluate_readout(template, &params.shifted(j, -h), obs, readout)?;
            Ok((up - down) / (2.0 * h))
        })
        .collect::<Result<Vec<f64>>>()?;
    GradientVector::new(values)
}

/// One policy-gradient sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorSample {
    pub obs: Vec<f64>,
    pub action: usize,
    pub advantage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorLossGradient {
    pub loss: f64,
    pub grad: GradientVector,
    /// Derivative with respect to the softmax `beta`; zero for PVM readouts.
    pub beta_grad: f64,
}

/// Groups batch indices by bitwise-identical input, in a deterministic order.
fn group_by_input<'a, I>(inputs: I) -> Vec<Vec<usize>>
where
    I: Iterator<Item = &'a [f64]>,
{
    let mut groups: BTreeMap<Vec<u64>, Vec<usize>> = BTreeMap::new();
    for (i, x) in inputs.enumerate() {
        groups
            .entry(x.iter().map(|v| v.to_bits()).collect())
            .or_default()
            .push(i);
    }
    groups.into_values().collect()
}

/// `loss = −mean[log π(a_t|s_t) · A_t]` and its gradient
/// `−mean[(A_t / π(a_t|s_t)) · ∂π(a_t|s_t)/∂θ]`, with `∂π` assembled from
/// shift-rule derivatives of the underlying readouts.
pub fn actor_loss_gradient(
    batch: &[ActorSample],
    template: &CircuitTemplate,
    params: &ParamVector,
    readout: &ReadoutMode,
    action_dim: usize,
) -> Result<ActorLossGradient> {
    if batch.is_empty() {
        return Err(Error::Batch("actor batch is empty".into()));
    }
    if let Some(s) = batch.iter().find(|s| !s.advantage.is_finite()) {
        return Err(Error::Data(format!("non-finite advantage {}", s.advantage)));
    }
    if let Some(s) = batch.iter().find(|s| s.action >= action_dim) {
        return Err(Error::Action(format!("action {} out of range 0..{action_dim}", s.action)));
    }
    readout.check(template, action_dim)?;
    let n_params = template.param_slots();
    let denom = 1.0 + action_dim as f64 * EPS_FLOOR;
    let scale = 1.0 / batch.len() as f64;
    let groups = group_by_input(batch.iter().map(|s| s.obs.as_slice()));

    let parts = groups
        .par_iter()
        .map(|idx| -> Result<(f64, Vec<f64>, f64)> {
            let obs = &batch[idx[0]].obs;
            let encoding = vqc::encode_observation(obs, template.n_qubits())?;
            let mut loss = 0.0;
            let mut grad = vec![0.0; n_params];
            let mut beta_grad = 0.0;
            match readout {
                ReadoutMode::ExpectationSoftmax { beta } => {
                    let selectors: Vec<_> = (0..action_dim).map(ReadoutSelector::ExpectationZ).collect();
                    let jac = shift_jacobian(template, params, &encoding, &selectors, ShiftRule::default(), None)?;
                    let z = &jac.values;
                    let pi = vqc::softmax(&z.iter().map(|v| beta * v).collect::<Vec<_>>());
                    let mean_z: f64 = pi.iter().zip(z).map(|(p, v)| p * v).sum();
                    for &i in idx {
                        let (a, adv) = (batch[i].action, batch[i].advantage);
                        let pf = (pi[a] + EPS_FLOOR) / denom;
                        loss -= scale * adv * pf.ln();
                        let w = -scale * adv / pf / denom;
                        // ∂π_a/∂z_k = β·π_a·(δ_ak − π_k)
                        for (k, row) in jac.rows.iter().enumerate() {
                            let dz = beta * pi[a] * (f64::from(u8::from(k == a)) - pi[k]);
                            if dz != 0.0 {
                                for (g, r) in grad.iter_mut().zip(row) {
                                    *g += w * dz * r;
                                }
                            }
                        }
                        beta_grad += w * pi[a] * (z[a] - mean_z);
                    }
                }
                ReadoutMode::Pvm { wires } => {
                    let mut actions: Vec<usize> = idx.iter().map(|&i| batch[i].action).collect();
                    actions.sort_unstable();
                    actions.dedup();
                    let selectors: Vec<_> = actions
                        .iter()
                        .map(|&a| ReadoutSelector::Probability {
                            wires: wires.clone(),
                            pattern: a,
                        })
                        .collect();
                    let jac = shift_jacobian(template, params, &encoding, &selectors, ShiftRule::default(), None)?;
                    for &i in idx {
                        let (a, adv) = (batch[i].action, batch[i].advantage);
                        let s = actions.binary_search(&a).expect("selector for action");
                        let pf = (jac.values[s].max(0.0) + EPS_FLOOR) / denom;
                        loss -= scale * adv * pf.ln();
                        let w = -scale * adv / pf / denom;
                        for (g, r) in grad.iter_mut().zip(&jac.rows[s]) {
                            *g += w * r;
                        }
                    }
                }
            }
            Ok((loss, grad, beta_grad))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut loss = 0.0;
    let mut grad = vec![0.0; n_params];
    let mut beta_grad = 0.0;
    for (l, g, b) in parts {
        loss += l;
        beta_grad += b;
        for (acc, v) in grad.iter_mut().zip(g) {
            *acc += v;
        }
    }
    Ok(ActorLossGradient {
        loss,
        grad: GradientVector::new(grad)?,
        beta_grad,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticLossGradient {
    pub loss: f64,
    pub grad: GradientVector,
    /// Derivative with respect to `v_scale`.
    pub scale_grad: f64,
}

/// Mean squared error between `critic_forward` and the targets, with
/// gradients through `⟨Z_0⟩` by the shift rule.
pub fn critic_loss_gradient(
    batch: &[(Vec<f64>, f64)],
    template: &CircuitTemplate,
    params: &ParamVector,
    v_scale: f64,
) -> Result<CriticLossGradient> {
    if batch.is_empty() {
        return Err(Error::Batch("critic batch is empty".into()));
    }
    if let Some((_, t)) = batch.iter().find(|(_, t)| !t.is_finite()) {
        return Err(Error::Data(format!("non-finite critic target {t}")));
    }
    let n_params = template.param_slots();
    let scale = 1.0 / batch.len() as f64;
    let groups = group_by_input(batch.iter().map(|(s, _)| s.as_slice()));
    let selector = [ReadoutSelector::ExpectationZ(0)];

    let parts = groups
        .par_iter()
        .map(|idx| -> Result<(f64, Vec<f64>, f64)> {
            let encoding = vqc::encode_summary(&batch[idx[0]].0, template.n_qubits())?;
            let jac = shift_jacobian(template, params, &encoding, &selector, ShiftRule::default(), None)?;
            let z = jac.values[0];
            let v = v_scale * z;
            let mut loss = 0.0;
            let mut residual = 0.0;
            for &i in idx {
                let r = v - batch[i].1;
                loss += scale * r * r;
                residual += scale * 2.0 * r;
            }
            let grad = jac.rows[0].iter().map(|d| residual * v_scale * d).collect();
            Ok((loss, grad, residual * z))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut loss = 0.0;
    let mut grad = vec![0.0; n_params];
    let mut scale_grad = 0.0;
    for (l, g, s) in parts {
        loss += l;
        scale_grad += s;
        for (acc, v) in grad.iter_mut().zip(g) {
            *acc += v;
        }
    }
    Ok(CriticLossGradient {
        loss,
        grad: GradientVector::new(grad)?,
        scale_grad,
    })
}

/// Adaptive-moment (Adam) optimizer state for one parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_opt: f64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step_count: u64,
}

impl OptimizerState {
    pub fn new(learning_rate: f64, len: usize) -> Self {
        OptimizerState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps_opt: 1e-8,
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn len(&self) -> usize {
        self.first_moment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_moment.is_empty()
    }

    /// In-place update of `values` with `grad`.
    pub fn apply(&mut self, values: &mut [f64], grad: &[f64]) -> Result<()> {
        if values.len() != self.len() || grad.len() != self.len() {
            return Err(Error::Dimension(format!(
                "optimizer tracks {} parameters, got {} values and {} gradients",
                self.len(),
                values.len(),
                grad.len()
            )));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..values.len() {
            let g = grad[i];
            self.first_moment[i] = self.beta1 * self.first_moment[i] + (1.0 - self.beta1) * g;
            self.second_moment[i] = self.beta2 * self.second_moment[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.first_moment[i] / c1;
            let v_hat = self.second_moment[i] / c2;
            values[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps_opt);
        }
        Ok(())
    }
}

/// Functional form of [`OptimizerState::apply`].
pub fn optimizer_step(
    params: &ParamVector,
    grad: &GradientVector,
    state: &OptimizerState,
) -> Result<(ParamVector, OptimizerState)> {
    let mut next = state.clone();
    let mut values = params.values().to_vec();
    next.apply(&mut values, grad.values())?;
    Ok((ParamVector::new(values)?, next))
}
