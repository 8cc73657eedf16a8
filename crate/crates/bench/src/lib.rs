//! Fixtures shared by the benchmarks.

use qmarl::{CircuitTemplate, ParamVector};

/// A template and a deterministic, non-trivial parameter vector for it.
pub fn fixture(n_qubits: usize, n_layers: usize) -> (CircuitTemplate, ParamVector) {
    let template = CircuitTemplate::new(n_qubits, n_layers).expect("valid template");
    let values = (0..template.param_slots())
        .map(|j| ((j * 37 % 101) as f64 / 101.0 - 0.5) * 3.0)
        .collect();
    (template, ParamVector::new(values).expect("finite"))
}

/// An observation of length `n` with varied entries.
pub fn observation(n: usize) -> Vec<f64> {
    (0..n).map(|i| (i as f64 * 0.7).sin()).collect()
}
