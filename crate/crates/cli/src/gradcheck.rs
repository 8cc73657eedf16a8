//! `gradcheck`: parameter-shift gradients against central finite differences
//! on random small circuits.

use qmarl::pshift::{self, ReadoutSelector, ShiftRule};
use qmarl::{rng, CircuitTemplate, ParamVector};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const TOLERANCE: f64 = 1e-5;
pub const FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckOptions {
    pub trials: usize,
    pub seed: u64,
    /// The rule under test. Only the negative control changes it.
    pub rule: ShiftRule,
}

impl GradcheckOptions {
    pub fn new(trials: usize, seed: u64) -> Self {
        GradcheckOptions {
            trials,
            seed,
            rule: ShiftRule::default(),
        }
    }
}

/// Everything needed to replay one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckInstance {
    pub trial: usize,
    pub n_qubits: usize,
    pub n_layers: usize,
    pub params: Vec<f64>,
    pub obs: Vec<f64>,
    pub readout: ReadoutSelector,
    pub rule: ShiftRule,
    pub fd_step: f64,
    pub max_deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub trials: Vec<GradcheckInstance>,
    pub max_deviation: f64,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.max_deviation <= TOLERANCE
    }

    /// The trial with the largest deviation.
    pub fn worst(&self) -> Option<&GradcheckInstance> {
        self.trials.iter().max_by(|a, b| a.max_deviation.total_cmp(&b.max_deviation))
    }
}

/// Draws trial `trial`: up to 4 qubits, 1 to 3 layers, a random observation
/// and a random readout (a Z expectation or one basis-state probability).
pub fn random_instance(seed: u64, trial: usize) -> qmarl::Result<(CircuitTemplate, ParamVector, Vec<f64>, ReadoutSelector)> {
    let mut r = rng::stream(seed, &[rng::STREAM_ORACLE, trial as u64]);
    let n = r.random_range(1..=4);
    let layers = r.random_range(1..=3);
    let template = CircuitTemplate::new(n, layers)?;
    let params = ParamVector::new(
        (0..template.param_slots())
            .map(|_| r.random_range(-std::f64::consts::PI..std::f64::consts::PI))
            .collect(),
    )?;
    let obs: Vec<f64> = (0..r.random_range(0..=n)).map(|_| r.random_range(-2.0..2.0)).collect();
    let readout = if r.random_bool(0.5) {
        ReadoutSelector::ExpectationZ(r.random_range(0..n))
    } else {
        let k = r.random_range(1..=n);
        let wires = sample(&mut r, n, k).into_vec();
        ReadoutSelector::Probability {
            pattern: r.random_range(0..1usize << k),
            wires,
        }
    };
    Ok((template, params, obs, readout))
}

pub fn run_gradcheck(opts: &GradcheckOptions) -> qmarl::Result<GradcheckReport> {
    let mut trials = Vec::with_capacity(opts.trials);
    for trial in 0..opts.trials {
        let (template, params, obs, readout) = random_instance(opts.seed, trial)?;
        let shift = pshift::shift_gradient_with(&template, &params, &obs, &readout, opts.rule, None)?;
        let fd = pshift::finite_difference_oracle(&template, &params, &obs, &readout, FD_STEP)?;
        trials.push(GradcheckInstance {
            trial,
            n_qubits: template.n_qubits(),
            n_layers: template.n_layers(),
            params: params.values().to_vec(),
            obs,
            readout,
            rule: opts.rule,
            fd_step: FD_STEP,
            max_deviation: shift.max_abs_diff(&fd),
        });
    }
    let max_deviation = trials.iter().map(|t| t.max_deviation).fold(0.0, f64::max);
    Ok(GradcheckReport { trials, max_deviation })
}

/// Reruns a serialized instance and returns its deviation.
pub fn replay(instance: &GradcheckInstance) -> qmarl::Result<f64> {
    let template = CircuitTemplate::new(instance.n_qubits, instance.n_layers)?;
    let params = ParamVector::new(instance.params.clone())?;
    let shift = pshift::shift_gradient_with(&template, &params, &instance.obs, &instance.readout, instance.rule, None)?;
    let fd = pshift::finite_difference_oracle(&template, &params, &instance.obs, &instance.readout, instance.fd_step)?;
    Ok(shift.max_abs_diff(&fd))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_rule_passes_and_corrupted_rule_fails() {
        let report = run_gradcheck(&GradcheckOptions::new(20, 3)).unwrap();
        assert!(report.passed(), "{}", report.max_deviation);
        let corrupted = GradcheckOptions {
            rule: ShiftRule {
                shift: 1.3,
                prefactor: 0.5,
            },
            ..GradcheckOptions::new(20, 3)
        };
        let report = run_gradcheck(&corrupted).unwrap();
        assert!(!report.passed());
        let worst = report.worst().unwrap();
        assert_eq!(replay(worst).unwrap(), worst.max_deviation);
    }
}
