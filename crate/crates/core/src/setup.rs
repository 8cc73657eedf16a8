//! Declarative environment and agent descriptions, and their construction.

use serde::{Deserialize, Serialize};

use crate::baselines::{self, Budget, DenseNet};
use crate::envs::{BanditConfig, BanditEnv, Environment, FactoryConfig, FactoryEnv, UavConfig, UavEnv};
use crate::error::{Error, Result};
use crate::marl::{Actors, Agent, AgentKind, ActorCritic, Critic, IqlAgent, RandomAgent};
use crate::pshift::OptimizerState;
use crate::rng;
use crate::vqc::{CircuitTemplate, ParamVector, ReadoutMode, DEFAULT_BETA, DEFAULT_V_SCALE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EnvSpec {
    Factory(FactoryConfig),
    Uav(UavConfig),
    Bandit(BanditConfig),
}

impl EnvSpec {
    pub fn name(&self) -> &'static str {
        match self {
            EnvSpec::Factory(_) => "factory",
            EnvSpec::Uav(_) => "uav",
            EnvSpec::Bandit(_) => "bandit",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            EnvSpec::Factory(c) => c.validate("env."),
            EnvSpec::Uav(c) => c.validate("env."),
            EnvSpec::Bandit(c) => c.validate("env."),
        }
    }

    /// Builds the environment; `seed` fixes per-run task draws.
    pub fn build(&self, seed: u64) -> Result<Box<dyn Environment>> {
        Ok(match self {
            EnvSpec::Factory(c) => Box::new(FactoryEnv::new(c.clone(), seed)?),
            EnvSpec::Uav(c) => Box::new(UavEnv::new(c.clone(), seed)?),
            EnvSpec::Bandit(c) => Box::new(BanditEnv::new(c.clone(), seed)?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReadoutKind {
    Softmax,
    Pvm,
}

/// Agent architecture and learner settings. Unset sizes are derived from the
/// environment (see [`AgentSpec::resolve`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSpec {
    pub kind: AgentKind,
    pub actor_qubits: Option<usize>,
    pub actor_layers: usize,
    pub critic_qubits: Option<usize>,
    pub critic_layers: usize,
    pub readout: Option<ReadoutKind>,
    pub beta: f64,
    pub train_beta: bool,
    pub v_scale: f64,
    pub train_v_scale: bool,
    pub iql_learning_rate: f64,
    pub iql_epsilon: f64,
    pub iql_levels: u8,
}

impl Default for AgentSpec {
    fn default() -> Self {
        AgentSpec {
            kind: AgentKind::Quantum,
            actor_qubits: None,
            actor_layers: 3,
            critic_qubits: None,
            critic_layers: 3,
            readout: None,
            beta: DEFAULT_BETA,
            train_beta: true,
            v_scale: DEFAULT_V_SCALE,
            train_v_scale: true,
            iql_learning_rate: 0.1,
            iql_epsilon: 0.1,
            iql_levels: 5,
        }
    }
}

/// An [`AgentSpec`] with every size filled in for a concrete environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedAgent {
    pub kind: AgentKind,
    pub n_agents: usize,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub actor_qubits: usize,
    pub critic_qubits: usize,
    pub readout: ReadoutKind,
}

impl AgentSpec {
    /// Fills unset sizes:
    /// - readout: PVM when `action_dim` is a power of two above
    ///   `max(obs_dim, 4)`, otherwise softmax;
    /// - actor qubits: `max(obs_dim, action_dim)` for softmax,
    ///   `max(obs_dim, log2 action_dim)` for PVM;
    /// - critic qubits: `max(obs_dim, 1)`, enough for a `2·obs_dim` summary.
    pub fn resolve(&self, n_agents: usize, obs_dim: usize, action_dim: usize) -> Result<ResolvedAgent> {
        let small = action_dim <= obs_dim.max(4) || !action_dim.is_power_of_two();
        let readout = self.readout.unwrap_or(if small {
            ReadoutKind::Softmax
        } else {
            ReadoutKind::Pvm
        });
        let pvm_bits = action_dim.trailing_zeros() as usize;
        if readout == ReadoutKind::Pvm && !action_dim.is_power_of_two() {
            return Err(Error::Config(format!(
                "`agent.readout` pvm needs a power-of-two action count, environment has {action_dim}"
            )));
        }
        let actor_qubits = self.actor_qubits.unwrap_or(match readout {
            ReadoutKind::Softmax => obs_dim.max(action_dim),
            ReadoutKind::Pvm => obs_dim.max(pvm_bits),
        });
        let critic_qubits = self.critic_qubits.unwrap_or(obs_dim.max(1));
        Ok(ResolvedAgent {
            kind: self.kind,
            n_agents,
            obs_dim,
            action_dim,
            actor_qubits,
            critic_qubits,
            readout,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |k: &str, m: String| Err(Error::Config(format!("`agent.{k}` {m}")));
        if self.actor_layers == 0 {
            return bad("actor_layers", "must be at least 1".into());
        }
        if self.critic_layers == 0 {
            return bad("critic_layers", "must be at least 1".into());
        }
        for (k, v) in [("actor_qubits", self.actor_qubits), ("critic_qubits", self.critic_qubits)] {
            if let Some(q) = v {
                if q == 0 || q > crate::qsim::MAX_QUBITS {
                    return bad(k, format!("must lie in 1..={}, got {q}", crate::qsim::MAX_QUBITS));
                }
            }
        }
        if !self.beta.is_finite() {
            return bad("beta", "must be finite".into());
        }
        if !self.v_scale.is_finite() {
            return bad("v_scale", "must be finite".into());
        }
        if !(0.0..=1.0).contains(&self.iql_epsilon) {
            return bad("iql_epsilon", "must lie in [0, 1]".into());
        }
        if !(self.iql_learning_rate >= 0.0 && self.iql_learning_rate <= 1.0) {
            return bad("iql_learning_rate", "must lie in [0, 1]".into());
        }
        if self.iql_levels == 0 {
            return bad("iql_levels", "must be at least 1".into());
        }
        Ok(())
    }
}

fn quantum_actors(spec: &AgentSpec, r: &ResolvedAgent, lr: f64, seed: u64) -> Result<Actors> {
    let template = CircuitTemplate::new(r.actor_qubits, spec.actor_layers)?;
    if r.obs_dim > r.actor_qubits {
        return Err(Error::Config(format!(
            "`agent.actor_qubits` = {} cannot encode {}-dimensional observations",
            r.actor_qubits, r.obs_dim
        )));
    }
    let readout = match r.readout {
        ReadoutKind::Softmax => ReadoutMode::ExpectationSoftmax { beta: spec.beta },
        ReadoutKind::Pvm => ReadoutMode::pvm(r.action_dim.trailing_zeros() as usize),
    };
    readout
        .check(&template, r.action_dim)
        .map_err(|e| Error::Config(format!("`agent.readout`: {e}")))?;
    let params: Vec<ParamVector> = (0..r.n_agents)
        .map(|i| template.init_params(&mut rng::stream(seed, &[rng::STREAM_INIT, i as u64])))
        .collect();
    let softmax = matches!(readout, ReadoutMode::ExpectationSoftmax { .. });
    Ok(Actors::Quantum {
        optimizers: (0..r.n_agents).map(|_| OptimizerState::new(lr, template.param_slots())).collect(),
        beta_optimizer: (softmax && spec.train_beta).then(|| OptimizerState::new(lr, 1)),
        template,
        params,
        readout,
    })
}

fn quantum_critic(spec: &AgentSpec, r: &ResolvedAgent, lr: f64, seed: u64) -> Result<Critic> {
    let template = CircuitTemplate::new(r.critic_qubits, spec.critic_layers)?;
    if 2 * r.obs_dim > 2 * r.critic_qubits {
        return Err(Error::Config(format!(
            "`agent.critic_qubits` = {} cannot encode a {}-entry joint summary",
            r.critic_qubits,
            2 * r.obs_dim
        )));
    }
    let params = template.init_params(&mut rng::stream(seed, &[rng::STREAM_INIT, CRITIC_STREAM]));
    Ok(Critic::Quantum {
        optimizer: OptimizerState::new(lr, template.param_slots()),
        scale_optimizer: spec.train_v_scale.then(|| OptimizerState::new(lr, 1)),
        template,
        params,
        v_scale: spec.v_scale,
    })
}

const CRITIC_STREAM: u64 = 1 << 20;

fn dense_critic(sizes: Vec<usize>, lr: f64, seed: u64) -> Result<Critic> {
    let net = DenseNet::init(sizes, &mut rng::stream(seed, &[rng::STREAM_INIT, CRITIC_STREAM]))?;
    Ok(Critic::Dense {
        optimizer: OptimizerState::new(lr, net.param_count()),
        net,
    })
}

/// Hidden width of a one-layer dense critic that brings the total closest to
/// 110 given `actor_params` already spent.
pub fn hybrid_critic_shape(actor_params: usize, obs_dim: usize) -> Result<Vec<usize>> {
    let target = 110usize;
    let input = 2 * obs_dim;
    let best = (1..=64)
        .map(|h| vec![input, h, 1])
        .min_by_key(|s| (actor_params + baselines::dense_param_count(s)).abs_diff(target))
        .expect("non-empty range");
    let total = actor_params + baselines::dense_param_count(&best);
    if total.abs_diff(target) as f64 > 0.05 * target as f64 {
        return Err(Error::BudgetInfeasible {
            budget: target,
            minimum: actor_params + baselines::dense_param_count(&[input, 1, 1]),
        });
    }
    Ok(best)
}

/// Builds any agent kind for an environment with the given shape.
pub fn build_agent(
    spec: &AgentSpec,
    n_agents: usize,
    obs_dim: usize,
    action_dim: usize,
    learning_rate: f64,
    seed: u64,
) -> Result<Box<dyn Agent>> {
    spec.validate()?;
    let r = spec.resolve(n_agents, obs_dim, action_dim)?;
    let lr = learning_rate;
    Ok(match spec.kind {
        AgentKind::Random => Box::new(RandomAgent::new(n_agents, action_dim)),
        AgentKind::Iql => Box::new(IqlAgent::new(
            n_agents,
            action_dim,
            spec.iql_learning_rate,
            spec.iql_epsilon,
            spec.iql_levels,
        )?),
        AgentKind::Quantum => Box::new(ActorCritic::new(
            AgentKind::Quantum,
            action_dim,
            quantum_actors(spec, &r, lr, seed)?,
            quantum_critic(spec, &r, lr, seed)?,
        )?),
        AgentKind::Hybrid => {
            let actors = quantum_actors(spec, &r, lr, seed)?;
            let critic = hybrid_critic_shape(actors.param_count(), obs_dim)?;
            Box::new(ActorCritic::new(AgentKind::Hybrid, action_dim, actors, dense_critic(critic, lr, seed)?)?)
        }
        AgentKind::Classical110 | AgentKind::Classical40k => {
            let budget = if spec.kind == AgentKind::Classical110 {
                Budget::Small
            } else {
                Budget::Large
            };
            let shapes = baselines::build_matched_baseline(&budget, obs_dim, action_dim, n_agents)?;
            let nets = (0..n_agents)
                .map(|i| DenseNet::init(shapes.actor.clone(), &mut rng::stream(seed, &[rng::STREAM_INIT, i as u64])))
                .collect::<Result<Vec<_>>>()?;
            let actors = Actors::Dense {
                optimizers: nets.iter().map(|n| OptimizerState::new(lr, n.param_count())).collect(),
                nets,
            };
            Box::new(ActorCritic::new(spec.kind, action_dim, actors, dense_critic(shapes.critic, lr, seed)?)?)
        }
    })
}
