//! Quantum multi-agent reinforcement learning on a statevector simulator.
//!
//! Wire 0 is the most significant bit of a basis index everywhere.

pub mod baselines;
pub mod envs;
pub mod error;
pub mod pshift;
pub mod qsim;
pub mod marl;
pub mod rng;
pub mod setup;
pub mod vqc;

pub use error::{Error, Result};
pub use pshift::{GradientVector, OptimizerState, ReadoutSelector, ShiftRule};
pub use qsim::{Gate, GateKind, Observable, StateVector};
pub use vqc::{ActionDistribution, CircuitTemplate, ParamVector, ReadoutMode};
pub use envs::{Environment, StepResult};
pub use marl::{Agent, AgentKind, TrainMetrics, TrainSpec, Trajectory};
pub use setup::{AgentSpec, EnvSpec};
