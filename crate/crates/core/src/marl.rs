//! Centralized-training, decentralized-execution actor-critic loop.
//!
//! Every epoch collects a fixed number of episodes, pushes the per-agent
//! trajectories into a FIFO replay buffer, and hands the most recent
//! trajectories of each agent to [`Agent::update`].

use std::collections::VecDeque;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{self, DenseNet, QTable};
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::pshift::{self, ActorSample, OptimizerState};
use crate::rng::{self, Rng};
use crate::vqc::{self, ActionDistribution, CircuitTemplate, ParamVector, ReadoutMode, EPS_FLOOR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub observation: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub log_prob: f64,
    pub joint_summary: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub agent_id: usize,
    pub episode: u64,
    pub records: Vec<Record>,
    pub episode_return: f64,
}

/// Bounded FIFO of trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    entries: VecDeque<Trajectory>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("`train.buffer_capacity` must be at least 1".into()));
        }
        Ok(ReplayBuffer {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Appends, evicting the oldest entry when full.
    pub fn push(&mut self, trajectory: Trajectory) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(trajectory);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Trajectory> {
        self.entries.iter()
    }

    /// Up to `n` most recent trajectories of `agent`, oldest first.
    pub fn recent_for_agent(&self, agent: usize, n: usize) -> Vec<&Trajectory> {
        let mut out: Vec<&Trajectory> = self.entries.iter().rev().filter(|t| t.agent_id == agent).take(n).collect();
        out.reverse();
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub epoch: usize,
    /// Undiscounted return summed over agents, averaged over the epoch's episodes.
    pub total_reward: f64,
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub wallclock_ms: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub actor_loss: f64,
    pub critic_loss: f64,
}

/// `G_t = Σ_{u≥t} γ^{u−t} r_u`.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + gamma * acc;
        out[t] = acc;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Returns {
    pub returns: Vec<f64>,
    pub advantages: Vec<f64>,
}

/// Discounted returns and advantages `G_t − V(joint_summary_t)`.
pub fn compute_returns<V>(trajectory: &Trajectory, gamma: f64, value: V) -> Result<Returns>
where
    V: Fn(&[f64]) -> Result<f64>,
{
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Config(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    let rewards: Vec<f64> = trajectory.records.iter().map(|r| r.reward).collect();
    let returns = discounted_returns(&rewards, gamma);
    let advantages = trajectory
        .records
        .iter()
        .zip(&returns)
        .map(|(r, g)| Ok(g - value(&r.joint_summary)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(Returns { returns, advantages })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Quantum,
    Hybrid,
    Classical110,
    Classical40k,
    Iql,
    Random,
}

impl AgentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::Quantum => "quantum",
            AgentKind::Hybrid => "hybrid",
            AgentKind::Classical110 => "classical110",
            AgentKind::Classical40k => "classical40k",
            AgentKind::Iql => "iql",
            AgentKind::Random => "random",
        }
    }
}

impl std::fmt::Display for AgentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The interface shared by every learner in a comparison.
pub trait Agent: Send + Sync {
    fn kind(&self) -> AgentKind;
    fn n_agents(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Trainable parameters across all networks, tables excluded.
    fn param_count(&self) -> usize;
    /// `param_count` split by network, e.g. `("actor0", 36)`.
    fn param_breakdown(&self) -> Vec<(String, usize)> {
        Vec::new()
    }
    /// Samples an action for `agent` and returns it with its log-probability.
    fn act(&self, agent: usize, obs: &[f64], rng: &mut Rng) -> Result<(usize, f64)>;
    /// One learning step on `batch[agent]`, the agent's most recent
    /// trajectories. All agents' lists cover the same episodes, in order.
    fn update(&mut self, batch: &[Vec<&Trajectory>], gamma: f64) -> Result<UpdateStats>;
}

fn sample(dist: &ActionDistribution, rng: &mut Rng) -> (usize, f64) {
    let a = dist.sample(rng);
    (a, dist.log_prob(a))
}

/// Runs one episode to completion.
pub fn collect_episode(
    env: &mut dyn Environment,
    agent: &dyn Agent,
    env_seed: u64,
    policy: &mut Rng,
    episode: u64,
) -> Result<Vec<Trajectory>> {
    let n = env.n_agents();
    if agent.n_agents() != n || agent.action_dim() != env.action_dim() {
        return Err(Error::Config(format!(
            "agent built for {} agents × {} actions, environment has {n} × {}",
            agent.n_agents(),
            agent.action_dim(),
            env.action_dim()
        )));
    }
    let mut obs = env.reset(env_seed);
    let mut trajectories: Vec<Trajectory> = (0..n)
        .map(|i| Trajectory {
            agent_id: i,
            episode,
            records: Vec::new(),
            episode_return: 0.0,
        })
        .collect();
    loop {
        let summary = vqc::joint_summary(&obs)?;
        let mut actions = Vec::with_capacity(n);
        let mut log_probs = Vec::with_capacity(n);
        for (i, o) in obs.iter().enumerate() {
            let (a, lp) = agent.act(i, o, policy)?;
            actions.push(a);
            log_probs.push(lp);
        }
        let step = env.step(&actions)?;
        for i in 0..n {
            let t = &mut trajectories[i];
            t.episode_return += step.rewards[i];
            t.records.push(Record {
                observation: std::mem::take(&mut obs[i]),
                action: actions[i],
                reward: step.rewards[i],
                log_prob: log_probs[i],
                joint_summary: summary.clone(),
            });
        }
        if step.done {
            return Ok(trajectories);
        }
        obs = step.observations;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSpec {
    pub epochs: usize,
    pub episodes_per_epoch: usize,
    /// Trajectories per agent handed to each update.
    pub batch_size: usize,
    pub gamma: f64,
    pub learning_rate: f64,
    pub buffer_capacity: usize,
}

impl Default for TrainSpec {
    fn default() -> Self {
        TrainSpec {
            epochs: 1000,
            episodes_per_epoch: 8,
            batch_size: 8,
            gamma: 0.99,
            learning_rate: 0.01,
            buffer_capacity: 64,
        }
    }
}

impl TrainSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |k: &str, m: &str| Err(Error::Config(format!("`train.{k}` {m}")));
        if self.episodes_per_epoch == 0 {
            return bad("episodes_per_epoch", "must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be at least 1");
        }
        if self.buffer_capacity == 0 {
            return bad("buffer_capacity", "must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma", "must lie in [0, 1]");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", "must be positive and finite");
        }
        Ok(())
    }
}

/// Trains `agent` on `env` for `spec.epochs` epochs.
///
/// Episode `e` of epoch `k` resets the environment with the seed derived from
/// `(seed, env stream, k, e)` and samples actions from the matching policy
/// stream, so results don't depend on how episodes are scheduled. `on_epoch`
/// sees every metrics row as it is produced; an error from it stops training.
pub fn train<F>(
    env: &dyn Environment,
    agent: &mut dyn Agent,
    spec: &TrainSpec,
    seed: u64,
    mut on_epoch: F,
) -> Result<Vec<TrainMetrics>>
where
    F: FnMut(&TrainMetrics) -> Result<()>,
{
    spec.validate()?;
    let n_agents = env.n_agents();
    let mut buffer = ReplayBuffer::new(spec.buffer_capacity)?;
    let mut metrics = Vec::with_capacity(spec.epochs);
    let start = Instant::now();
    for epoch in 0..spec.epochs {
        let shared: &dyn Agent = &*agent;
        let episodes = (0..spec.episodes_per_epoch)
            .into_par_iter()
            .map(|e| {
                let path = [epoch as u64, e as u64];
                let env_seed = rng::derive_seed(seed, &[rng::STREAM_ENV, path[0], path[1]]);
                let mut policy = rng::stream(seed, &[rng::STREAM_POLICY, path[0], path[1]]);
                let mut env = env.clone_box();
                let id = (epoch * spec.episodes_per_epoch + e) as u64;
                collect_episode(env.as_mut(), shared, env_seed, &mut policy, id)
            })
            .collect::<Result<Vec<_>>>()?;

        let mut total = 0.0;
        for trajectories in episodes {
            total += trajectories.iter().map(|t| t.episode_return).sum::<f64>();
            for t in trajectories {
                buffer.push(t);
            }
        }
        let per_agent: Vec<Vec<&Trajectory>> = (0..n_agents)
            .map(|i| buffer.recent_for_agent(i, spec.batch_size))
            .collect();
        let stats = agent.update(&per_agent, spec.gamma)?;
        let row = TrainMetrics {
            epoch,
            total_reward: total / spec.episodes_per_epoch as f64,
            actor_loss: stats.actor_loss,
            critic_loss: stats.critic_loss,
            wallclock_ms: start.elapsed().as_millis() as u64,
        };
        on_epoch(&row)?;
        metrics.push(row);
    }
    Ok(metrics)
}

/// Mean episode total reward of the uniform random policy over `episodes`
/// episodes.
pub fn random_baseline(env: &dyn Environment, episodes: usize, seed: u64) -> Result<f64> {
    let agent = RandomAgent::new(env.n_agents(), env.action_dim());
    let mut total = 0.0;
    for e in 0..episodes {
        let mut env = env.clone_box();
        let mut policy = rng::stream(seed, &[rng::STREAM_ORACLE, e as u64]);
        let env_seed = rng::derive_seed(seed, &[rng::STREAM_ORACLE, e as u64, 1]);
        let trajectories = collect_episode(env.as_mut(), &agent, env_seed, &mut policy, e as u64)?;
        total += trajectories.iter().map(|t| t.episode_return).sum::<f64>();
    }
    Ok(total / episodes.max(1) as f64)
}

// ---------------------------------------------------------------- agents

/// Per-agent actor networks.
#[derive(Debug, Clone)]
pub enum Actors {
    Quantum {
        template: CircuitTemplate,
        params: Vec<ParamVector>,
        readout: ReadoutMode,
        optimizers: Vec<OptimizerState>,
        /// Present when the softmax `beta` is trained; shared by all actors.
        beta_optimizer: Option<OptimizerState>,
    },
    Dense {
        nets: Vec<DenseNet>,
        optimizers: Vec<OptimizerState>,
    },
}

/// The centralized critic on joint summaries.
#[derive(Debug, Clone)]
pub enum Critic {
    Quantum {
        template: CircuitTemplate,
        params: ParamVector,
        v_scale: f64,
        optimizer: OptimizerState,
        scale_optimizer: Option<OptimizerState>,
    },
    Dense {
        net: DenseNet,
        optimizer: OptimizerState,
    },
}

impl Actors {
    pub fn param_count(&self) -> usize {
        match self {
            Actors::Quantum {
                params, beta_optimizer, ..
            } => params.iter().map(ParamVector::len).sum::<usize>() + usize::from(beta_optimizer.is_some()),
            Actors::Dense { nets, .. } => nets.iter().map(DenseNet::param_count).sum(),
        }
    }

    pub fn distribution(&self, agent: usize, obs: &[f64], action_dim: usize) -> Result<ActionDistribution> {
        match self {
            Actors::Quantum {
                template, params, readout, ..
            } => vqc::actor_forward(template, &params[agent], obs, readout, action_dim),
            Actors::Dense { nets, .. } => {
                let logits = baselines::dense_forward(&nets[agent], obs)?;
                Ok(ActionDistribution::floored(&vqc::softmax(&logits), EPS_FLOOR))
            }
        }
    }

    /// Loss and gradient step for one agent. Returns the loss and the
    /// gradient with respect to a shared softmax `beta`, if any.
    fn step(&mut self, agent: usize, samples: &[ActorSample], action_dim: usize) -> Result<(f64, f64)> {
        match self {
            Actors::Quantum {
                template,
                params,
                readout,
                optimizers,
                ..
            } => {
                let out = pshift::actor_loss_gradient(samples, template, &params[agent], readout, action_dim)?;
                let (next, state) = pshift::optimizer_step(&params[agent], &out.grad, &optimizers[agent])?;
                params[agent] = next;
                optimizers[agent] = state;
                Ok((out.loss, out.beta_grad))
            }
            Actors::Dense { nets, optimizers } => {
                let (loss, grad) = dense_actor_loss_gradient(&nets[agent], samples)?;
                optimizers[agent].apply(nets[agent].params_mut(), &grad)?;
                Ok((loss, 0.0))
            }
        }
    }
}

/// Softmax policy-gradient loss for a dense actor, by backpropagation.
pub fn dense_actor_loss_gradient(net: &DenseNet, samples: &[ActorSample]) -> Result<(f64, Vec<f64>)> {
    if samples.is_empty() {
        return Err(Error::Batch("actor batch is empty".into()));
    }
    let scale = 1.0 / samples.len() as f64;
    let a_dim = net.output_dim();
    let denom = 1.0 + a_dim as f64 * EPS_FLOOR;
    let mut loss = 0.0;
    let mut grad = vec![0.0; net.param_count()];
    for s in samples {
        if !s.advantage.is_finite() {
            return Err(Error::Data(format!("non-finite advantage {}", s.advantage)));
        }
        if s.action >= a_dim {
            return Err(Error::Action(format!("action {} outside 0..{a_dim}", s.action)));
        }
        let pi = vqc::softmax(&baselines::dense_forward(net, &s.obs)?);
        let a = s.action;
        let pf = (pi[a] + EPS_FLOOR) / denom;
        loss -= scale * s.advantage * pf.ln();
        if s.advantage == 0.0 {
            continue;
        }
        // ∂πf_a/∂logit_k = π_a (δ_ak − π_k) / (1 + Aε)
        let w = -scale * s.advantage / pf / denom;
        let dlogits: Vec<f64> = (0..a_dim)
            .map(|k| w * pi[a] * (f64::from(u8::from(k == a)) - pi[k]))
            .collect();
        for (g, d) in grad.iter_mut().zip(baselines::dense_backprop(net, &s.obs, &dlogits)?) {
            *g += d;
        }
    }
    Ok((loss, grad))
}

/// Mean squared error of a dense critic's first output, by backpropagation.
pub fn dense_critic_loss_gradient(net: &DenseNet, batch: &[(Vec<f64>, f64)]) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::Batch("critic batch is empty".into()));
    }
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; net.param_count()];
    for (x, y) in batch {
        if !y.is_finite() {
            return Err(Error::Data(format!("non-finite critic target {y}")));
        }
        let r = baselines::dense_forward(net, x)?[0] - y;
        loss += scale * r * r;
        let mut out_grad = vec![0.0; net.output_dim()];
        out_grad[0] = 2.0 * scale * r;
        for (g, d) in grad.iter_mut().zip(baselines::dense_backprop(net, x, &out_grad)?) {
            *g += d;
        }
    }
    Ok((loss, grad))
}

impl Critic {
    pub fn param_count(&self) -> usize {
        match self {
            Critic::Quantum {
                params, scale_optimizer, ..
            } => params.len() + usize::from(scale_optimizer.is_some()),
            Critic::Dense { net, .. } => net.param_count(),
        }
    }

    pub fn value(&self, summary: &[f64]) -> Result<f64> {
        match self {
            Critic::Quantum {
                template,
                params,
                v_scale,
                ..
            } => vqc::critic_forward(template, params, summary, *v_scale),
            Critic::Dense { net, .. } => Ok(baselines::dense_forward(net, summary)?[0]),
        }
    }

    fn step(&mut self, batch: &[(Vec<f64>, f64)]) -> Result<f64> {
        match self {
            Critic::Quantum {
                template,
                params,
                v_scale,
                optimizer,
                scale_optimizer,
            } => {
                let out = pshift::critic_loss_gradient(batch, template, params, *v_scale)?;
                let (next, state) = pshift::optimizer_step(params, &out.grad, optimizer)?;
                *params = next;
                *optimizer = state;
                if let Some(opt) = scale_optimizer {
                    let mut s = [*v_scale];
                    opt.apply(&mut s, &[out.scale_grad])?;
                    *v_scale = s[0];
                }
                Ok(out.loss)
            }
            Critic::Dense { net, optimizer } => {
                let (loss, grad) = dense_critic_loss_gradient(net, batch)?;
                optimizer.apply(net.params_mut(), &grad)?;
                Ok(loss)
            }
        }
    }
}

/// Actors plus a centralized critic; covers the quantum, hybrid and dense
/// configurations.
#[derive(Debug, Clone)]
pub struct ActorCritic {
    kind: AgentKind,
    action_dim: usize,
    pub actors: Actors,
    pub critic: Critic,
}

impl ActorCritic {
    pub fn new(kind: AgentKind, action_dim: usize, actors: Actors, critic: Critic) -> Result<Self> {
        let n = match &actors {
            Actors::Quantum { params, optimizers, .. } => (params.len(), optimizers.len()),
            Actors::Dense { nets, optimizers } => (nets.len(), optimizers.len()),
        };
        if n.0 == 0 || n.0 != n.1 {
            return Err(Error::Config("actor team needs one optimizer per actor".into()));
        }
        Ok(ActorCritic {
            kind,
            action_dim,
            actors,
            critic,
        })
    }

    /// Current softmax `beta` of a quantum team, if it uses that readout.
    pub fn beta(&self) -> Option<f64> {
        match &self.actors {
            Actors::Quantum {
                readout: ReadoutMode::ExpectationSoftmax { beta },
                ..
            } => Some(*beta),
            _ => None,
        }
    }
}

impl Agent for ActorCritic {
    fn kind(&self) -> AgentKind {
        self.kind
    }

    fn n_agents(&self) -> usize {
        match &self.actors {
            Actors::Quantum { params, .. } => params.len(),
            Actors::Dense { nets, .. } => nets.len(),
        }
    }

    fn action_dim(&self) -> usize {
        self.action_dim
    }

    fn param_count(&self) -> usize {
        self.actors.param_count() + self.critic.param_count()
    }

    fn param_breakdown(&self) -> Vec<(String, usize)> {
        let mut out = Vec::new();
        match &self.actors {
            Actors::Quantum {
                params, beta_optimizer, ..
            } => {
                out.extend(params.iter().enumerate().map(|(i, p)| (format!("actor{i}"), p.len())));
                if beta_optimizer.is_some() {
                    out.push(("beta".into(), 1));
                }
            }
            Actors::Dense { nets, .. } => {
                out.extend(nets.iter().enumerate().map(|(i, n)| (format!("actor{i}"), n.param_count())));
            }
        }
        match &self.critic {
            Critic::Quantum {
                params, scale_optimizer, ..
            } => {
                out.push(("critic".into(), params.len()));
                if scale_optimizer.is_some() {
                    out.push(("v_scale".into(), 1));
                }
            }
            Critic::Dense { net, .. } => out.push(("critic".into(), net.param_count())),
        }
        out
    }

    fn act(&self, agent: usize, obs: &[f64], rng: &mut Rng) -> Result<(usize, f64)> {
        Ok(sample(&self.actors.distribution(agent, obs, self.action_dim)?, rng))
    }

    fn update(&mut self, batch: &[Vec<&Trajectory>], gamma: f64) -> Result<UpdateStats> {
        let n = self.n_agents();
        if batch.len() != n || batch.iter().any(|b| b.is_empty()) {
            return Err(Error::Batch(format!("expected non-empty batches for {n} agents")));
        }
        // Critic targets: the agents' mean return at each step.
        let returns: Vec<Vec<Vec<f64>>> = batch
            .iter()
            .map(|list| {
                list.iter()
                    .map(|t| discounted_returns(&t.records.iter().map(|r| r.reward).collect::<Vec<_>>(), gamma))
                    .collect()
            })
            .collect();
        let mut critic_batch = Vec::new();
        for (e, lead) in batch[0].iter().enumerate() {
            for (t, record) in lead.records.iter().enumerate() {
                let target = returns.iter().map(|r| r[e][t]).sum::<f64>() / n as f64;
                critic_batch.push((record.joint_summary.clone(), target));
            }
        }
        let values = critic_batch
            .iter()
            .map(|(s, _)| self.critic.value(s))
            .collect::<Result<Vec<f64>>>()?;
        let critic_loss = self.critic.step(&critic_batch)?;

        let mut actor_loss = 0.0;
        let mut beta_grad = 0.0;
        for (agent, list) in batch.iter().enumerate() {
            let mut samples = Vec::new();
            let mut k = 0;
            for (e, traj) in list.iter().enumerate() {
                for (t, record) in traj.records.iter().enumerate() {
                    samples.push(ActorSample {
                        obs: record.observation.clone(),
                        action: record.action,
                        advantage: returns[agent][e][t] - values[k],
                    });
                    k += 1;
                }
            }
            let (loss, bg) = self.actors.step(agent, &samples, self.action_dim)?;
            actor_loss += loss / n as f64;
            beta_grad += bg;
        }
        if let Actors::Quantum {
            readout: ReadoutMode::ExpectationSoftmax { beta },
            beta_optimizer: Some(opt),
            ..
        } = &mut self.actors
        {
            let mut b = [*beta];
            opt.apply(&mut b, &[beta_grad])?;
            *beta = b[0];
        }
        Ok(UpdateStats {
            actor_loss,
            critic_loss,
        })
    }
}

/// Independent tabular Q-learners on bucketed observations.
#[derive(Debug, Clone)]
pub struct IqlAgent {
    tables: Vec<QTable>,
    levels: u8,
}

impl IqlAgent {
    pub fn new(n_agents: usize, action_dim: usize, learning_rate: f64, epsilon: f64, levels: u8) -> Result<Self> {
        if levels == 0 {
            return Err(Error::Config("`agent.iql_levels` must be at least 1".into()));
        }
        Ok(IqlAgent {
            tables: (0..n_agents)
                .map(|_| QTable::new(action_dim, learning_rate, epsilon))
                .collect::<Result<_>>()?,
            levels,
        })
    }

    pub fn tables(&self) -> &[QTable] {
        &self.tables
    }
}

impl Agent for IqlAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::Iql
    }

    fn n_agents(&self) -> usize {
        self.tables.len()
    }

    fn action_dim(&self) -> usize {
        self.tables[0].n_actions()
    }

    fn param_count(&self) -> usize {
        0
    }

    fn act(&self, agent: usize, obs: &[f64], rng: &mut Rng) -> Result<(usize, f64)> {
        let table = &self.tables[agent];
        let state = baselines::bucket(obs, self.levels);
        let a = table.act(&state, rng);
        Ok((a, table.behavior_prob(&state, a).ln()))
    }

    fn update(&mut self, batch: &[Vec<&Trajectory>], gamma: f64) -> Result<UpdateStats> {
        for (agent, list) in batch.iter().enumerate() {
            let table = &mut self.tables[agent];
            for traj in list {
                let states: Vec<Vec<u8>> = traj
                    .records
                    .iter()
                    .map(|r| baselines::bucket(&r.observation, self.levels))
                    .collect();
                for (t, r) in traj.records.iter().enumerate() {
                    let next = states.get(t + 1).map(Vec::as_slice);
                    baselines::iql_update(table, &states[t], r.action, r.reward, next, gamma)?;
                }
            }
        }
        Ok(UpdateStats::default())
    }
}

/// Uniform random actions; nothing to learn.
#[derive(Debug, Clone)]
pub struct RandomAgent {
    n_agents: usize,
    action_dim: usize,
}

impl RandomAgent {
    pub fn new(n_agents: usize, action_dim: usize) -> Self {
        RandomAgent { n_agents, action_dim }
    }
}

impl Agent for RandomAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::Random
    }

    fn n_agents(&self) -> usize {
        self.n_agents
    }

    fn action_dim(&self) -> usize {
        self.action_dim
    }

    fn param_count(&self) -> usize {
        0
    }

    fn act(&self, _agent: usize, _obs: &[f64], rng: &mut Rng) -> Result<(usize, f64)> {
        Ok((baselines::random_policy(self.action_dim, rng), -(self.action_dim as f64).ln()))
    }

    fn update(&mut self, _batch: &[Vec<&Trajectory>], _gamma: f64) -> Result<UpdateStats> {
        Ok(UpdateStats::default())
    }
}
