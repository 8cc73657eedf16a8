//! Seeded multi-agent environments.
//!
//! Each environment owns its dynamics generator; `reset(seed)` reseeds it, so
//! an episode is a pure function of `(config, construction seed, reset seed,
//! actions)`.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepInfo {
    /// Loads or unloads that were truncated by a capacity.
    pub overflow_events: u32,
    /// Moves replaced by wind.
    pub wind_events: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub observations: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub done: bool,
    pub info: StepInfo,
}

pub trait Environment: Send + Sync {
    fn n_agents(&self) -> usize;
    fn obs_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Starts a new episode and returns the initial observations.
    fn reset(&mut self, seed: u64) -> Vec<Vec<f64>>;
    fn step(&mut self, actions: &[usize]) -> Result<StepResult>;
    fn clone_box(&self) -> Box<dyn Environment>;
}

fn check_actions(actions: &[usize], n_agents: usize, action_dim: usize) -> Result<()> {
    if actions.len() != n_agents {
        return Err(Error::Action(format!(
            "expected {n_agents} actions, got {}",
            actions.len()
        )));
    }
    match actions.iter().position(|&a| a >= action_dim) {
        Some(i) => Err(Error::Action(format!(
            "agent {i} chose action {} outside 0..{action_dim}",
            actions[i]
        ))),
        None => Ok(()),
    }
}

fn range_err(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("`{key}` {msg}"))
}

// ---------------------------------------------------------------- factory

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FactoryConfig {
    pub n_agents: usize,
    pub amr_capacity: u32,
    pub warehouse_capacity: u32,
    pub source_capacity: u32,
    pub arrivals_per_step: u32,
    pub ship_per_step: u32,
    pub good_probability: f64,
    pub overflow_penalty: f64,
    pub horizon: u32,
}

impl Default for FactoryConfig {
    fn default() -> Self {
        FactoryConfig {
            n_agents: 2,
            amr_capacity: 10,
            warehouse_capacity: 100,
            source_capacity: 20,
            arrivals_per_step: 2,
            ship_per_step: 3,
            good_probability: 0.9,
            overflow_penalty: 0.5,
            horizon: 50,
        }
    }
}

impl FactoryConfig {
    /// Checks ranges; `prefix` is prepended to key names in errors.
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let key = |k: &str| format!("{prefix}{k}");
        if self.n_agents == 0 {
            return Err(range_err(&key("n_agents"), "must be at least 1"));
        }
        for (k, v) in [
            ("amr_capacity", self.amr_capacity),
            ("warehouse_capacity", self.warehouse_capacity),
            ("source_capacity", self.source_capacity),
            ("ship_per_step", self.ship_per_step),
            ("horizon", self.horizon),
        ] {
            if v == 0 {
                return Err(range_err(&key(k), "must be at least 1"));
            }
        }
        if !(0.0..=1.0).contains(&self.good_probability) {
            return Err(range_err(&key("good_probability"), "must lie in [0, 1]"));
        }
        if !(self.overflow_penalty >= 0.0 && self.overflow_penalty.is_finite()) {
            return Err(range_err(&key("overflow_penalty"), "must be finite and non-negative"));
        }
        Ok(())
    }
}

pub const FACTORY_ACTIONS: usize = 4;
pub const FACTORY_IDLE: usize = 0;
pub const FACTORY_LOAD1: usize = 1;
pub const FACTORY_LOAD2: usize = 2;
pub const FACTORY_UNLOAD: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactoryState {
    pub source_buffer: u32,
    pub amr_queues: Vec<u32>,
    pub warehouse: u32,
    pub step: u32,
}

/// Queue management: items arrive at a source buffer, robots carry them to a
/// warehouse, the warehouse ships a fixed number per step.
#[derive(Debug, Clone)]
pub struct FactoryEnv {
    config: FactoryConfig,
    state: FactoryState,
    created: u64,
    shipped: u64,
    rng: Rng,
}

impl FactoryEnv {
    pub fn new(config: FactoryConfig, seed: u64) -> Result<Self> {
        config.validate("env.")?;
        let n_agents = config.n_agents;
        let mut env = FactoryEnv {
            config,
            state: FactoryState {
                source_buffer: 0,
                amr_queues: vec![0; n_agents],
                warehouse: 0,
                step: 0,
            },
            created: 0,
            shipped: 0,
            rng: rng::stream(seed, &[]),
        };
        env.reset(seed);
        Ok(env)
    }

    pub fn state(&self) -> &FactoryState {
        &self.state
    }

    pub fn config(&self) -> &FactoryConfig {
        &self.config
    }

    /// Items that entered the source buffer since reset.
    pub fn items_created(&self) -> u64 {
        self.created
    }

    /// Items that left the warehouse since reset.
    pub fn items_shipped(&self) -> u64 {
        self.shipped
    }

    /// Items currently held anywhere in the system.
    pub fn items_in_system(&self) -> u64 {
        let s = &self.state;
        u64::from(s.source_buffer)
            + s.amr_queues.iter().map(|&q| u64::from(q)).sum::<u64>()
            + u64::from(s.warehouse)
    }

    fn observations(&self) -> Vec<Vec<f64>> {
        let c = &self.config;
        let s = &self.state;
        s.amr_queues
            .iter()
            .map(|&q| {
                vec![
                    f64::from(q) / f64::from(c.amr_capacity),
                    f64::from(s.warehouse) / f64::from(c.warehouse_capacity),
                    f64::from(s.source_buffer) / f64::from(c.source_capacity),
                    f64::from(s.step) / f64::from(c.horizon),
                ]
            })
            .collect()
    }

    /// Sets queue contents directly, for hand-built scenarios.
    pub fn set_state(&mut self, state: FactoryState) -> Result<()> {
        let c = &self.config;
        if state.amr_queues.len() != self.state.amr_queues.len()
            || state.source_buffer > c.source_capacity
            || state.warehouse > c.warehouse_capacity
            || state.step >= c.horizon
            || state.amr_queues.iter().any(|&q| q > c.amr_capacity)
        {
            return Err(Error::Data(format!("factory state out of bounds: {state:?}")));
        }
        self.state = state;
        self.created = self.items_in_system() + self.shipped;
        Ok(())
    }
}

impl Environment for FactoryEnv {
    fn clone_box(&self) -> Box<dyn Environment> {
        Box::new(self.clone())
    }

    fn n_agents(&self) -> usize {
        self.state.amr_queues.len()
    }

    fn obs_dim(&self) -> usize {
        4
    }

    fn action_dim(&self) -> usize {
        FACTORY_ACTIONS
    }

    fn reset(&mut self, seed: u64) -> Vec<Vec<f64>> {
        let n = self.state.amr_queues.len();
        self.state = FactoryState {
            source_buffer: 0,
            amr_queues: vec![0; n],
            warehouse: 0,
            step: 0,
        };
        self.created = 0;
        self.shipped = 0;
        self.rng = rng::stream(seed, &[rng::STREAM_ENV]);
        self.observations()
    }

    fn step(&mut self, actions: &[usize]) -> Result<StepResult> {
        check_actions(actions, self.n_agents(), FACTORY_ACTIONS)?;
        if self.state.step >= self.config.horizon {
            return Err(Error::EpisodeDone);
        }
        let c = self.config.clone();
        let s = &mut self.state;
        let mut overflow = vec![0u32; actions.len()];

        let arrived = c.arrivals_per_step.min(c.source_capacity - s.source_buffer);
        s.source_buffer += arrived;
        self.created += u64::from(arrived);

        for (i, &a) in actions.iter().enumerate() {
            let want = match a {
                FACTORY_LOAD1 => 1,
                FACTORY_LOAD2 => 2,
                _ => continue,
            };
            let moved = want.min(s.source_buffer).min(c.amr_capacity - s.amr_queues[i]);
            s.source_buffer -= moved;
            s.amr_queues[i] += moved;
            if moved < want {
                overflow[i] += 1;
            }
        }
        for (i, &a) in actions.iter().enumerate() {
            if a != FACTORY_UNLOAD {
                continue;
            }
            let q = s.amr_queues[i];
            let moved = q.min(c.warehouse_capacity - s.warehouse);
            s.amr_queues[i] -= moved;
            s.warehouse += moved;
            if moved < q {
                overflow[i] += 1;
            }
        }

        let ship = c.ship_per_step.min(s.warehouse);
        s.warehouse -= ship;
        self.shipped += u64::from(ship);
        let good = (0..ship)
            .filter(|_| self.rng.random::<f64>() < c.good_probability)
            .count();
        s.step += 1;

        let shared = good as f64 / f64::from(c.ship_per_step);
        let rewards = overflow
            .iter()
            .map(|&o| shared - c.overflow_penalty * f64::from(o))
            .collect();
        Ok(StepResult {
            observations: self.observations(),
            rewards,
            done: self.state.step >= c.horizon,
            info: StepInfo {
                overflow_events: overflow.iter().sum(),
                wind_events: 0,
            },
        })
    }
}

// ---------------------------------------------------------------- uav

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UavConfig {
    pub n_agents: usize,
    pub grid: u32,
    pub users: u32,
    pub coverage_radius: u32,
    pub initial_energy: f64,
    pub move_cost: f64,
    pub hover_cost: f64,
    pub position_noise: f64,
    pub wind_probability: f64,
    pub horizon: u32,
}

impl Default for UavConfig {
    fn default() -> Self {
        UavConfig {
            n_agents: 2,
            grid: 10,
            users: 6,
            coverage_radius: 2,
            initial_energy: 30.0,
            move_cost: 1.0,
            hover_cost: 0.5,
            position_noise: 0.02,
            wind_probability: 0.1,
            horizon: 40,
        }
    }
}

impl UavConfig {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let key = |k: &str| format!("{prefix}{k}");
        if self.n_agents == 0 {
            return Err(range_err(&key("n_agents"), "must be at least 1"));
        }
        for (k, v) in [("grid", self.grid), ("users", self.users), ("horizon", self.horizon)] {
            if v == 0 {
                return Err(range_err(&key(k), "must be at least 1"));
            }
        }
        for (k, v) in [
            ("initial_energy", self.initial_energy),
            ("move_cost", self.move_cost),
            ("hover_cost", self.hover_cost),
            ("position_noise", self.position_noise),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(range_err(&key(k), "must be finite and non-negative"));
            }
        }
        if self.initial_energy == 0.0 {
            return Err(range_err(&key("initial_energy"), "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.wind_probability) {
            return Err(range_err(&key("wind_probability"), "must lie in [0, 1]"));
        }
        Ok(())
    }
}

pub const UAV_ACTIONS: usize = 5;
pub const UAV_NORTH: usize = 0;
pub const UAV_SOUTH: usize = 1;
pub const UAV_EAST: usize = 2;
pub const UAV_WEST: usize = 3;
pub const UAV_HOVER: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavState {
    pub positions: Vec<(u32, u32)>,
    pub energies: Vec<f64>,
    pub users: Vec<(u32, u32)>,
    pub step: u32,
}

/// Mobile access: UAVs on a grid serve fixed ground users within a
/// Chebyshev radius, under position-report noise and wind.
///
/// Users are placed once from the construction seed and stay put across
/// episodes. A UAV with no energy left stays grounded and earns nothing.
#[derive(Debug, Clone)]
pub struct UavEnv {
    config: UavConfig,
    state: UavState,
    rng: Rng,
}

impl UavEnv {
    pub fn new(config: UavConfig, seed: u64) -> Result<Self> {
        config.validate("env.")?;
        let n_agents = config.n_agents;
        let mut task = rng::stream(seed, &[rng::STREAM_TASK]);
        let users = (0..config.users)
            .map(|_| (task.random_range(0..config.grid), task.random_range(0..config.grid)))
            .collect();
        let mut env = UavEnv {
            state: UavState {
                positions: vec![(0, 0); n_agents],
                energies: vec![config.initial_energy; n_agents],
                users,
                step: 0,
            },
            config,
            rng: rng::stream(seed, &[]),
        };
        env.reset(seed);
        Ok(env)
    }

    pub fn state(&self) -> &UavState {
        &self.state
    }

    /// Overrides positions and energies, for hand-built scenarios.
    pub fn set_agents(&mut self, positions: Vec<(u32, u32)>, energies: Vec<f64>) -> Result<()> {
        let g = self.config.grid;
        if positions.len() != self.n_agents()
            || energies.len() != self.n_agents()
            || positions.iter().any(|&(x, y)| x >= g || y >= g)
            || energies.iter().any(|e| !(*e >= 0.0))
        {
            return Err(Error::Data("uav agent state out of bounds".into()));
        }
        self.state.positions = positions;
        self.state.energies = energies;
        Ok(())
    }

    pub fn set_users(&mut self, users: Vec<(u32, u32)>) -> Result<()> {
        let g = self.config.grid;
        if users.is_empty() || users.iter().any(|&(x, y)| x >= g || y >= g) {
            return Err(Error::Data("user positions out of bounds".into()));
        }
        self.state.users = users;
        Ok(())
    }

    fn covers(&self, agent: (u32, u32), user: (u32, u32)) -> bool {
        agent.0.abs_diff(user.0).max(agent.1.abs_diff(user.1)) <= self.config.coverage_radius
    }

    fn active(&self, i: usize) -> bool {
        self.state.energies[i] > 0.0
    }

    fn team_coverage(&self) -> f64 {
        let covered = self
            .state
            .users
            .iter()
            .filter(|&&u| (0..self.n_agents()).any(|i| self.active(i) && self.covers(self.state.positions[i], u)))
            .count();
        covered as f64 / self.state.users.len() as f64
    }

    fn observations(&mut self) -> Vec<Vec<f64>> {
        let g = f64::from(self.config.grid);
        let coverage = self.team_coverage();
        let noise = Normal::new(0.0, self.config.position_noise).expect("validated sigma");
        let mut out = Vec::with_capacity(self.n_agents());
        for i in 0..self.n_agents() {
            let (x, y) = self.state.positions[i];
            let (nx, ny) = if self.config.position_noise > 0.0 {
                (noise.sample(&mut self.rng), noise.sample(&mut self.rng))
            } else {
                (0.0, 0.0)
            };
            out.push(vec![
                f64::from(x) / g + nx,
                f64::from(y) / g + ny,
                self.state.energies[i] / self.config.initial_energy,
                coverage,
            ]);
        }
        out
    }
}

impl Environment for UavEnv {
    fn clone_box(&self) -> Box<dyn Environment> {
        Box::new(self.clone())
    }

    fn n_agents(&self) -> usize {
        self.state.positions.len()
    }

    fn obs_dim(&self) -> usize {
        4
    }

    fn action_dim(&self) -> usize {
        UAV_ACTIONS
    }

    fn reset(&mut self, seed: u64) -> Vec<Vec<f64>> {
        let g = self.config.grid - 1;
        let corners = [(0, 0), (g, 0), (0, g), (g, g)];
        let n = self.n_agents();
        self.state.positions = (0..n).map(|i| corners[i % 4]).collect();
        self.state.energies = vec![self.config.initial_energy; n];
        self.state.step = 0;
        self.rng = rng::stream(seed, &[rng::STREAM_ENV]);
        self.observations()
    }

    fn step(&mut self, actions: &[usize]) -> Result<StepResult> {
        check_actions(actions, self.n_agents(), UAV_ACTIONS)?;
        if self.state.step >= self.config.horizon || (0..self.n_agents()).all(|i| !self.active(i)) {
            return Err(Error::EpisodeDone);
        }
        let c = self.config.clone();
        let flying: Vec<bool> = (0..self.n_agents()).map(|i| self.active(i)).collect();
        let mut wind = 0;
        for (i, &intended) in actions.iter().enumerate() {
            if !flying[i] {
                continue;
            }
            let mut a = intended;
            if c.wind_probability > 0.0 && self.rng.random::<f64>() < c.wind_probability {
                // Uniform over the other four moves.
                let k = self.rng.random_range(0..UAV_ACTIONS - 1);
                a = if k >= intended { k + 1 } else { k };
                wind += 1;
            }
            let (x, y) = self.state.positions[i];
            let max = c.grid - 1;
            self.state.positions[i] = match a {
                UAV_NORTH => (x, (y + 1).min(max)),
                UAV_SOUTH => (x, y.saturating_sub(1)),
                UAV_EAST => ((x + 1).min(max), y),
                UAV_WEST => (x.saturating_sub(1), y),
                _ => (x, y),
            };
            let cost = if a == UAV_HOVER { c.hover_cost } else { c.move_cost };
            self.state.energies[i] = (self.state.energies[i] - cost).max(0.0);
        }
        self.state.step += 1;
        let rewards = (0..self.n_agents())
            .map(|i| {
                if !flying[i] {
                    return 0.0;
                }
                let p = self.state.positions[i];
                let n = self.state.users.iter().filter(|&&u| self.covers(p, u)).count();
                n as f64 / self.state.users.len() as f64
            })
            .collect();
        let done = self.state.step >= c.horizon || (0..self.n_agents()).all(|i| !self.active(i));
        Ok(StepResult {
            observations: self.observations(),
            rewards,
            done,
            info: StepInfo {
                overflow_events: 0,
                wind_events: wind,
            },
        })
    }
}

// ---------------------------------------------------------------- bandit

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BanditConfig {
    /// Number of bits; the action set has `2^k` elements.
    pub k: u32,
}

impl Default for BanditConfig {
    fn default() -> Self {
        BanditConfig { k: 1 }
    }
}

impl BanditConfig {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        if matches!(self.k, 1 | 4 | 16) {
            Ok(())
        } else {
            Err(range_err(&format!("{prefix}k"), format_args!("must be one of 1, 4, 16, got {}", self.k)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BanditState {
    pub target_bits: u32,
    pub k: u32,
}

/// Single-step combinatorial bandit over `k`-bit actions, rewarded by
/// Hamming similarity to a hidden target drawn once per run.
///
/// The single agent sees a constant vector of `k` ones. Under angle
/// encoding that places every wire in an equal superposition, so a fresh
/// circuit policy starts close to uniform over the action set.
#[derive(Debug, Clone)]
pub struct BanditEnv {
    state: BanditState,
    done: bool,
}

impl BanditEnv {
    pub fn new(config: BanditConfig, seed: u64) -> Result<Self> {
        config.validate("env.")?;
        let mut task = rng::stream(seed, &[rng::STREAM_TASK]);
        let target_bits = task.random_range(0..1u64 << config.k) as u32;
        Ok(BanditEnv {
            state: BanditState {
                target_bits,
                k: config.k,
            },
            done: false,
        })
    }

    pub fn state(&self) -> BanditState {
        self.state
    }

    fn observation(&self) -> Vec<f64> {
        vec![1.0; self.state.k as usize]
    }

    /// `1 − hamming(action, target) / k`.
    pub fn reward(&self, action: usize) -> f64 {
        let distance = (action as u32 ^ self.state.target_bits).count_ones();
        1.0 - f64::from(distance) / f64::from(self.state.k)
    }
}

impl Environment for BanditEnv {
    fn clone_box(&self) -> Box<dyn Environment> {
        Box::new(self.clone())
    }

    fn n_agents(&self) -> usize {
        1
    }

    fn obs_dim(&self) -> usize {
        self.state.k as usize
    }

    fn action_dim(&self) -> usize {
        1 << self.state.k
    }

    fn reset(&mut self, _seed: u64) -> Vec<Vec<f64>> {
        self.done = false;
        vec![self.observation()]
    }

    fn step(&mut self, actions: &[usize]) -> Result<StepResult> {
        check_actions(actions, 1, self.action_dim())?;
        if self.done {
            return Err(Error::EpisodeDone);
        }
        self.done = true;
        Ok(StepResult {
            observations: vec![self.observation()],
            rewards: vec![self.reward(actions[0])],
            done: true,
            info: StepInfo::default(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factory(n: usize) -> FactoryEnv {
        FactoryEnv::new(FactoryConfig { n_agents: n, ..FactoryConfig::default() }, 11).unwrap()
    }

    #[test]
    fn factory_reset_examples() {
        let mut env = factory(2);
        let obs = env.reset(5);
        assert_eq!(obs, vec![vec![0.0; 4]; 2]);
        assert_eq!(factory(5).reset(0)[0].len(), 4);
    }

    #[test]
    fn factory_idle_from_empty() {
        let mut env = factory(2);
        env.reset(1);
        let r = env.step(&[FACTORY_IDLE, FACTORY_IDLE]).unwrap();
        assert_eq!(r.rewards, vec![0.0, 0.0]);
        assert_eq!(env.state().source_buffer, 2);
    }

    #[test]
    fn factory_unload_ships_same_step() {
        let cfg = FactoryConfig {
            good_probability: 1.0,
            arrivals_per_step: 0,
            n_agents: 1,
            ..FactoryConfig::default()
        };
        let mut env = FactoryEnv::new(cfg, 0).unwrap();
        env.set_state(FactoryState {
            source_buffer: 0,
            amr_queues: vec![2],
            warehouse: 0,
            step: 0,
        })
        .unwrap();
        let r = env.step(&[FACTORY_UNLOAD]).unwrap();
        assert!((r.rewards[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn factory_full_queue_overflows() {
        let mut env = factory(1);
        env.set_state(FactoryState {
            source_buffer: 5,
            amr_queues: vec![10],
            warehouse: 0,
            step: 0,
        })
        .unwrap();
        let r = env.step(&[FACTORY_LOAD1]).unwrap();
        assert_eq!(env.state().amr_queues, vec![10]);
        assert_eq!(r.info.overflow_events, 1);
        assert_eq!(r.rewards[0], -0.5);
    }

    #[test]
    fn factory_loads_resolve_in_agent_order() {
        let mut env = factory(2);
        env.set_state(FactoryState {
            source_buffer: 0,
            amr_queues: vec![0, 0],
            warehouse: 0,
            step: 0,
        })
        .unwrap();
        // Two items arrive; agent 0 takes both.
        let r = env.step(&[FACTORY_LOAD2, FACTORY_LOAD2]).unwrap();
        assert_eq!(env.state().amr_queues, vec![2, 0]);
        assert_eq!(r.info.overflow_events, 1);
        assert_eq!(r.rewards, vec![0.0, -0.5]);
    }

    #[test]
    fn factory_episode_ends_at_horizon() {
        let mut env = factory(2);
        env.reset(3);
        for t in 0..50 {
            let r = env.step(&[FACTORY_LOAD1, FACTORY_UNLOAD]).unwrap();
            assert_eq!(r.done, t == 49);
        }
        assert_eq!(env.step(&[0, 0]), Err(Error::EpisodeDone));
        assert!(matches!(env.step(&[0, 4]), Err(Error::Action(_))));
    }

    #[test]
    fn uav_reset_examples() {
        let cfg = UavConfig {
            position_noise: 0.0,
            ..UavConfig::default()
        };
        let mut env = UavEnv::new(UavConfig { n_agents: 4, ..cfg }, 9).unwrap();
        let obs = env.reset(2);
        assert_eq!(env.state().positions, vec![(0, 0), (9, 0), (0, 9), (9, 9)]);
        assert_eq!(&obs[3][..3], &[0.9, 0.9, 1.0]);
        let again = UavEnv::new(UavConfig { n_agents: 4, ..UavConfig::default() }, 9).unwrap();
        assert_eq!(again.state().users, env.state().users);
    }

    #[test]
    fn uav_hover_without_users() {
        let cfg = UavConfig {
            wind_probability: 0.0,
            ..UavConfig::default()
        };
        let mut env = UavEnv::new(UavConfig { n_agents: 1, ..cfg }, 0).unwrap();
        env.set_users(vec![(9, 9)]).unwrap();
        env.reset(0);
        let r = env.step(&[UAV_HOVER]).unwrap();
        assert_eq!(r.rewards, vec![0.0]);
        assert_eq!(env.state().energies, vec![29.5]);
    }

    #[test]
    fn uav_coverage_count() {
        let cfg = UavConfig {
            wind_probability: 0.0,
            users: 4,
            ..UavConfig::default()
        };
        let mut env = UavEnv::new(UavConfig { n_agents: 1, ..cfg }, 0).unwrap();
        env.set_users(vec![(4, 4), (9, 9), (9, 0), (0, 9)]).unwrap();
        env.reset(0);
        env.set_agents(vec![(2, 2)], vec![30.0]).unwrap();
        let r = env.step(&[UAV_EAST]).unwrap();
        assert_eq!(env.state().positions[0], (3, 2));
        assert_eq!(r.rewards, vec![0.25]);
    }

    #[test]
    fn uav_full_wind_always_perturbs() {
        let cfg = UavConfig {
            wind_probability: 1.0,
            ..UavConfig::default()
        };
        let mut env = UavEnv::new(UavConfig { n_agents: 2, ..cfg }, 4).unwrap();
        env.reset(4);
        for _ in 0..20 {
            let r = env.step(&[UAV_HOVER, UAV_NORTH]).unwrap();
            assert_eq!(r.info.wind_events, 2);
        }
    }

    #[test]
    fn uav_grounded_when_empty() {
        let cfg = UavConfig {
            initial_energy: 1.0,
            wind_probability: 0.0,
            ..UavConfig::default()
        };
        let mut env = UavEnv::new(UavConfig { n_agents: 1, ..cfg }, 0).unwrap();
        env.reset(0);
        let r = env.step(&[UAV_NORTH]).unwrap();
        assert!(r.done);
        assert_eq!(env.step(&[UAV_NORTH]), Err(Error::EpisodeDone));
    }

    #[test]
    fn bandit_examples() {
        for k in [1, 4, 16] {
            let env = BanditEnv::new(BanditConfig { k }, 3).unwrap();
            let t = env.state().target_bits;
            assert!(u64::from(t) < 1 << k);
            assert_eq!(env.reward(t as usize), 1.0);
            assert_eq!(env.reward((!t & ((1u64 << k) - 1) as u32) as usize), 0.0);
            assert_eq!(BanditEnv::new(BanditConfig { k }, 3).unwrap().state(), env.state());
        }
        let mut env = BanditEnv::new(BanditConfig { k: 4 }, 0).unwrap();
        env.reset(0);
        assert!(matches!(env.step(&[16]), Err(Error::Action(_))));
        assert!(env.step(&[3]).unwrap().done);
        assert!(matches!(BanditEnv::new(BanditConfig { k: 3 }, 0), Err(Error::Config(m)) if m.contains("env.k")));
    }
}
