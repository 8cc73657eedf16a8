//! Variational quantum circuit models.
//!
//! A [`CircuitTemplate`] fixes the gate layout: one RY encoding rotation per
//! wire, then `n_layers` layers of RX·RY·RZ on every wire closed by a CNOT
//! ring `i → (i+1) mod n`. Angles come from two places: encoding slots are
//! filled from the observation, parameter slots from a [`ParamVector`].
//!
//! The ring's CNOTs run from the highest control wire down to wire 0. In that
//! order each output bit of a ring is the parity of at most three input bits
//! (ascending order would chain every bit into long prefix parities), which
//! keeps PVM policy gradients from vanishing on wide registers.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim::{self, Gate, GateKind, StateVector};

/// Probability floor applied to actor readouts before renormalization.
pub const EPS_FLOOR: f64 = 1e-6;
/// Initial critic output scale.
pub const DEFAULT_V_SCALE: f64 = 20.0;
/// Initial softmax inverse temperature.
pub const DEFAULT_BETA: f64 = 5.0;
/// Parameters are drawn from `(-INIT_RANGE, INIT_RANGE)`.
pub const INIT_RANGE: f64 = PI / 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Slot {
    Encoding(usize),
    Param(usize),
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedGate {
    pub kind: GateKind,
    pub target: usize,
    pub control: Option<usize>,
    pub slot: Slot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitTemplate {
    n_qubits: usize,
    n_layers: usize,
    gate_plan: Vec<PlannedGate>,
}

impl CircuitTemplate {
    pub fn new(n_qubits: usize, n_layers: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > qsim::MAX_QUBITS {
            return Err(Error::Size(format!(
                "template needs 1..={} qubits, got {n_qubits}",
                qsim::MAX_QUBITS
            )));
        }
        if n_layers == 0 {
            return Err(Error::Config("template needs at least one layer".into()));
        }
        let mut plan = Vec::with_capacity(n_qubits * (1 + 4 * n_layers));
        for w in 0..n_qubits {
            plan.push(PlannedGate {
                kind: GateKind::RY,
                target: w,
                control: None,
                slot: Slot::Encoding(w),
            });
        }
        let mut p = 0;
        for _ in 0..n_layers {
            for w in 0..n_qubits {
                for kind in [GateKind::RX, GateKind::RY, GateKind::RZ] {
                    plan.push(PlannedGate {
                        kind,
                        target: w,
                        control: None,
                        slot: Slot::Param(p),
                    });
                    p += 1;
                }
            }
            if n_qubits >= 2 {
                for w in (0..n_qubits).rev() {
                    plan.push(PlannedGate {
                        kind: GateKind::CNOT,
                        target: (w + 1) % n_qubits,
                        control: Some(w),
                        slot: Slot::Fixed,
                    });
                }
            }
        }
        Ok(CircuitTemplate {
            n_qubits,
            n_layers,
            gate_plan: plan,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    pub fn encoding_slots(&self) -> usize {
        self.n_qubits
    }

    pub fn param_slots(&self) -> usize {
        self.n_layers * self.n_qubits * 3
    }

    pub fn gate_plan(&self) -> &[PlannedGate] {
        &self.gate_plan
    }

    /// The trainable part of the plan with `params` bound, in order.
    pub fn bind(&self, params: &ParamVector) -> Result<Vec<Gate>> {
        self.check_params(params)?;
        Ok(self
            .gate_plan
            .iter()
            .filter(|g| !matches!(g.slot, Slot::Encoding(_)))
            .map(|g| match g.slot {
                Slot::Param(j) => Gate::rotation(g.kind, g.target, params.values[j]),
                _ => Gate::cnot(g.control.expect("ring gate"), g.target),
            })
            .collect())
    }

    pub(crate) fn check_params(&self, params: &ParamVector) -> Result<()> {
        if params.len() != self.param_slots() {
            return Err(Error::Dimension(format!(
                "template has {} parameter slots, got {} values",
                self.param_slots(),
                params.len()
            )));
        }
        Ok(())
    }

    /// Runs `encoding` followed by the bound layers from `|0…0⟩`.
    pub fn evaluate(&self, params: &ParamVector, encoding: &[Gate]) -> Result<StateVector> {
        let layers = self.bind(params)?;
        for (i, g) in encoding.iter().chain(&layers).enumerate() {
            g.validate(self.n_qubits).map_err(|e| e.at_gate(i))?;
        }
        let mut state = qsim::zero_state(self.n_qubits)?;
        qsim::run_fused(&mut state, encoding.iter().chain(&layers).copied(), &mut Vec::new(), false);
        Ok(state)
    }

    /// Near-identity random parameters.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        ParamVector::new(
            (0..self.param_slots())
                .map(|_| rng.random_range(-INIT_RANGE..INIT_RANGE))
                .collect(),
        )
        .expect("finite init")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    values: Vec<f64>,
}

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("parameter vector has non-finite entries".into()));
        }
        Ok(ParamVector { values })
    }

    pub fn zeros(len: usize) -> Self {
        ParamVector {
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

    /// Copy with entry `j` moved by `delta`.
    pub fn shifted(&self, j: usize, delta: f64) -> ParamVector {
        let mut values = self.values.clone();
        values[j] += delta;
        ParamVector { values }
    }
}

/// Normalized probabilities over a discrete action set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionDistribution {
    probabilities: Vec<f64>,
}

impl ActionDistribution {
    /// Validates non-negativity and normalization (±1e-9).
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::Dimension("empty action distribution".into()));
        }
        if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Data("negative or non-finite probability".into()));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Data(format!("probabilities sum to {total}")));
        }
        Ok(ActionDistribution { probabilities })
    }

    pub fn uniform(action_dim: usize) -> Self {
        ActionDistribution {
            probabilities: vec![1.0 / action_dim as f64; action_dim],
        }
    }

    /// Applies `p ↦ (p + ε) / (1 + A·ε)`.
    pub fn floored(raw: &[f64], eps: f64) -> Self {
        let denom = 1.0 + raw.len() as f64 * eps;
        ActionDistribution {
            probabilities: raw.iter().map(|p| (p.max(0.0) + eps) / denom).collect(),
        }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn action_dim(&self) -> usize {
        self.probabilities.len()
    }

    pub fn prob(&self, action: usize) -> f64 {
        self.probabilities[action]
    }

    pub fn log_prob(&self, action: usize) -> f64 {
        self.probabilities[action].ln()
    }

    /// Inverse-CDF sample.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in self.probabilities.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // Rounding left `u` above the final partial sum.
        self.probabilities
            .iter()
            .rposition(|&p| p > 0.0)
            .unwrap_or(0)
    }

    pub fn argmax(&self) -> usize {
        self.probabilities
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &p)| if p > best.1 { (i, p) } else { best })
            .0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ReadoutMode {
    /// `softmax(beta · (⟨Z_0⟩, …, ⟨Z_{A-1}⟩))`.
    ExpectationSoftmax { beta: f64 },
    /// Computational-basis probabilities on `wires`.
    Pvm { wires: Vec<usize> },
}

impl ReadoutMode {
    /// PVM over the first `bits` wires.
    pub fn pvm(bits: usize) -> Self {
        ReadoutMode::Pvm {
            wires: (0..bits).collect(),
        }
    }

    pub fn check(&self, template: &CircuitTemplate, action_dim: usize) -> Result<()> {
        match self {
            ReadoutMode::ExpectationSoftmax { beta } => {
                if !beta.is_finite() {
                    return Err(Error::Config("softmax beta is not finite".into()));
                }
                if action_dim == 0 || action_dim > template.n_qubits() {
                    return Err(Error::Config(format!(
                        "softmax readout needs 1 <= action_dim <= n_qubits ({}), got {action_dim}",
                        template.n_qubits()
                    )));
                }
            }
            ReadoutMode::Pvm { wires } => {
                qsim::check_wire_subset(wires, template.n_qubits())
                    .map_err(|e| Error::Config(e.to_string()))?;
                if wires.len() >= usize::BITS as usize || action_dim != 1 << wires.len() {
                    return Err(Error::Config(format!(
                        "PVM over {} wires yields 2^{} actions, action_dim is {action_dim}",
                        wires.len(),
                        wires.len()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One RY per wire with angle `2·atan(x)`; missing entries are zero.
pub fn encode_observation(obs: &[f64], n_qubits: usize) -> Result<Vec<Gate>> {
    if obs.len() > n_qubits {
        return Err(Error::Dimension(format!(
            "observation of length {} does not fit {n_qubits} qubits",
            obs.len()
        )));
    }
    check_finite(obs)?;
    Ok((0..n_qubits)
        .map(|w| Gate::ry(w, 2.0 * obs.get(w).copied().unwrap_or(0.0).atan()))
        .collect())
}

/// Critic encoding: the first `n_qubits` entries as in [`encode_observation`],
/// entries `n_qubits..2·n_qubits` as `RZ(2·atan(x))` on wire `i - n_qubits`.
///
/// A joint summary has length `2M`, so the critic register carries two
/// values per wire.
pub fn encode_summary(summary: &[f64], n_qubits: usize) -> Result<Vec<Gate>> {
    if summary.len() > 2 * n_qubits {
        return Err(Error::Dimension(format!(
            "joint summary of length {} does not fit {n_qubits} qubits",
            summary.len()
        )));
    }
    check_finite(summary)?;
    let mut gates: Vec<Gate> = (0..n_qubits)
        .map(|w| Gate::ry(w, 2.0 * summary.get(w).copied().unwrap_or(0.0).atan()))
        .collect();
    gates.extend(
        summary
            .iter()
            .skip(n_qubits)
            .enumerate()
            .map(|(w, x)| Gate::rz(w, 2.0 * x.atan())),
    );
    Ok(gates)
}

fn check_finite(xs: &[f64]) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Data("input has non-finite entries".into()))
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Raw (unfloored) policy read from a prepared state.
pub(crate) fn raw_policy(state: &StateVector, readout: &ReadoutMode, action_dim: usize) -> Vec<f64> {
    match readout {
        ReadoutMode::ExpectationSoftmax { beta } => {
            let logits: Vec<f64> = (0..action_dim)
                .map(|w| beta * qsim::expectation_z_unchecked(state, w))
                .collect();
            softmax(&logits)
        }
        ReadoutMode::Pvm { wires } => qsim::basis_probabilities_unchecked(state, wires),
    }
}

/// Encode, run the layers, read out an action distribution.
///
/// Both readouts are ε-floored (`EPS_FLOOR`) and renormalized, so every
/// action keeps probability at least `ε / (1 + A·ε)`.
pub fn actor_forward(
    template: &CircuitTemplate,
    params: &ParamVector,
    obs: &[f64],
    readout: &ReadoutMode,
    action_dim: usize,
) -> Result<ActionDistribution> {
    readout.check(template, action_dim)?;
    let encoding = encode_observation(obs, template.n_qubits())?;
    let state = template.evaluate(params, &encoding)?;
    Ok(ActionDistribution::floored(
        &raw_policy(&state, readout, action_dim),
        EPS_FLOOR,
    ))
}

/// `v_scale · ⟨Z_0⟩` on the encoded joint summary.
pub fn critic_forward(
    template: &CircuitTemplate,
    params: &ParamVector,
    joint_summary: &[f64],
    v_scale: f64,
) -> Result<f64> {
    let encoding = encode_summary(joint_summary, template.n_qubits())?;
    let state = template.evaluate(params, &encoding)?;
    Ok(v_scale * qsim::expectation_z_unchecked(&state, 0))
}

/// Element-wise mean of the agents' observations followed by the
/// element-wise max. Length `2M` for any number of agents.
pub fn joint_summary<O: AsRef<[f64]>>(observations: &[O]) -> Result<Vec<f64>> {
    let first = observations
        .first()
        .ok_or_else(|| Error::Dimension("joint summary needs at least one agent".into()))?
        .as_ref();
    let m = first.len();
    let mut mean = vec![0.0; m];
    let mut max = vec![f64::NEG_INFINITY; m];
    for obs in observations {
        let obs = obs.as_ref();
        if obs.len() != m {
            return Err(Error::Dimension(format!(
                "ragged observations: lengths {m} and {}",
                obs.len()
            )));
        }
        for (i, &x) in obs.iter().enumerate() {
            mean[i] += x;
            max[i] = max[i].max(x);
        }
    }
    let n = observations.len() as f64;
    mean.iter_mut().for_each(|x| *x /= n);
    mean.extend(max);
    Ok(mean)
}

pub fn param_count(template: &CircuitTemplate) -> usize {
    template.param_slots()
}
