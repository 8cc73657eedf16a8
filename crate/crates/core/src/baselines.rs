//! Classical comparison agents: dense networks, tabular Q-learning and a
//! uniform random policy.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fully connected network: tanh on hidden layers, linear output layer.
///
/// Parameters are stored flat, layer by layer: the `out × in` weight matrix
/// (row-major) followed by `out` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    layer_sizes: Vec<usize>,
    params: Vec<f64>,
}

/// `Σ (in + 1) · out` over consecutive layer pairs.
pub fn dense_param_count(layer_sizes: &[usize]) -> usize {
    layer_sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
}

impl DenseNet {
    pub fn zeros(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::Dimension(format!("invalid layer sizes {layer_sizes:?}")));
        }
        let n = dense_param_count(&layer_sizes);
        Ok(DenseNet {
            layer_sizes,
            params: vec![0.0; n],
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(layer_sizes: Vec<usize>, rng: &mut R) -> Result<Self> {
        let mut net = DenseNet::zeros(layer_sizes)?;
        let mut offset = 0;
        for l in 0..net.layer_sizes.len() - 1 {
            let (fan_in, fan_out) = (net.layer_sizes[l], net.layer_sizes[l + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in &mut net.params[offset..offset + fan_in * fan_out] {
                *w = rng.random_range(-limit..limit);
            }
            offset += (fan_in + 1) * fan_out;
        }
        Ok(net)
    }

    pub fn from_params(layer_sizes: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        let mut net = DenseNet::zeros(layer_sizes)?;
        if params.len() != net.params.len() {
            return Err(Error::Dimension(format!(
                "network needs {} parameters, got {}",
                net.params.len(),
                params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("at least two layers")
    }

    /// Activations of every layer, input first, output last.
    fn activations(&self, input: &[f64]) -> Result<Vec<Vec<f64>>> {
        if input.len() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "network input is {}, got {}",
                self.input_dim(),
                input.len()
            )));
        }
        let last = self.layer_sizes.len() - 2;
        let mut acts = vec![input.to_vec()];
        let mut offset = 0;
        for l in 0..=last {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let weights = &self.params[offset..offset + n_in * n_out];
            let biases = &self.params[offset + n_in * n_out..offset + (n_in + 1) * n_out];
            let x = &acts[l];
            let y: Vec<f64> = (0..n_out)
                .map(|o| {
                    let z = biases[o]
                        + weights[o * n_in..(o + 1) * n_in]
                            .iter()
                            .zip(x)
                            .map(|(w, v)| w * v)
                            .sum::<f64>();
                    if l == last {
                        z
                    } else {
                        z.tanh()
                    }
                })
                .collect();
            acts.push(y);
            offset += (n_in + 1) * n_out;
        }
        Ok(acts)
    }
}

pub fn dense_forward(net: &DenseNet, input: &[f64]) -> Result<Vec<f64>> {
    Ok(net.activations(input)?.pop().expect("output layer"))
}

/// Reverse-mode gradient of `⟨output_gradient, net(input)⟩` with respect to
/// the flat parameter vector.
pub fn dense_backprop(net: &DenseNet, input: &[f64], output_gradient: &[f64]) -> Result<Vec<f64>> {
    if output_gradient.len() != net.output_dim() {
        return Err(Error::Dimension(format!(
            "output gradient has length {}, network output is {}",
            output_gradient.len(),
            net.output_dim()
        )));
    }
    let acts = net.activations(input)?;
    let mut grad = vec![0.0; net.params.len()];
    let mut delta = output_gradient.to_vec();
    let n_layers = net.layer_sizes.len() - 1;
    let mut end = net.params.len();
    for l in (0..n_layers).rev() {
        let (n_in, n_out) = (net.layer_sizes[l], net.layer_sizes[l + 1]);
        let start = end - (n_in + 1) * n_out;
        let x = &acts[l];
        for o in 0..n_out {
            grad[start + n_in * n_out + o] = delta[o];
            for i in 0..n_in {
                grad[start + o * n_in + i] = delta[o] * x[i];
            }
        }
        if l > 0 {
            // Hidden activations are tanh, so dz = dy · (1 − y²).
            let weights = &net.params[start..start + n_in * n_out];
            delta = (0..n_in)
                .map(|i| {
                    let back: f64 = (0..n_out).map(|o| weights[o * n_in + i] * delta[o]).sum();
                    back * (1.0 - x[i] * x[i])
                })
                .collect();
        }
        end = start;
    }
    Ok(grad)
}

/// Parameter budget for a matched classical baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Budget {
    /// One tanh hidden layer per network, widths searched to land near 110.
    Small,
    /// Two tanh hidden layers per network, widths searched to land near 40,000.
    Large,
    /// Explicit hidden widths.
    Layers { actor: Vec<usize>, critic: Vec<usize> },
}

impl Budget {
    pub fn target(&self) -> Option<usize> {
        match self {
            Budget::Small => Some(110),
            Budget::Large => Some(40_000),
            Budget::Layers { .. } => None,
        }
    }

    pub fn from_target(budget: usize) -> Result<Self> {
        match budget {
            110 => Ok(Budget::Small),
            40_000 => Ok(Budget::Large),
            other => Err(Error::Config(format!(
                "unknown parameter budget {other}; presets are 110 and 40000"
            ))),
        }
    }
}

/// Actor networks (one per agent) and a critic on the joint summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedShapes {
    pub actor: Vec<usize>,
    pub critic: Vec<usize>,
    pub n_actors: usize,
    pub param_count: usize,
}

fn shapes(hidden: &[usize], input: usize, output: usize) -> Vec<usize> {
    let mut s = vec![input];
    s.extend_from_slice(hidden);
    s.push(output);
    s
}

/// Sizes `n_actors` actors `obs_dim → … → action_dim` and a critic
/// `2·obs_dim → … → 1` so the combined count lands within ±5% of the budget.
///
/// Presets search hidden widths `1..=512` (all hidden layers of a network
/// share one width) and keep the combination closest to the target. A budget
/// that even width-1 networks overshoot by more than 5% is infeasible.
pub fn build_matched_baseline(
    budget: &Budget,
    obs_dim: usize,
    action_dim: usize,
    n_actors: usize,
) -> Result<MatchedShapes> {
    if obs_dim == 0 || action_dim == 0 || n_actors == 0 {
        return Err(Error::Dimension("baseline needs positive obs_dim, action_dim and n_actors".into()));
    }
    let critic_in = 2 * obs_dim;
    let total = |actor: &[usize], critic: &[usize]| {
        n_actors * dense_param_count(actor) + dense_param_count(critic)
    };
    let (depth, target) = match budget {
        Budget::Layers { actor, critic } => {
            let actor = shapes(actor, obs_dim, action_dim);
            let critic = shapes(critic, critic_in, 1);
            if actor.contains(&0) || critic.contains(&0) {
                return Err(Error::Config("hidden widths must be positive".into()));
            }
            let param_count = total(&actor, &critic);
            return Ok(MatchedShapes {
                actor,
                critic,
                n_actors,
                param_count,
            });
        }
        Budget::Small => (1, 110),
        Budget::Large => (2, 40_000),
    };
    let tolerance = target as f64 * 0.05;
    let minimum = total(&shapes(&vec![1; depth], obs_dim, action_dim), &shapes(&vec![1; depth], critic_in, 1));
    if minimum as f64 > target as f64 + tolerance {
        return Err(Error::BudgetInfeasible {
            budget: target,
            minimum,
        });
    }
    let mut best: Option<(usize, MatchedShapes)> = None;
    for ha in 1..=512 {
        let actor = shapes(&vec![ha; depth], obs_dim, action_dim);
        if total(&actor, &shapes(&vec![1; depth], critic_in, 1)) > target * 2 {
            break;
        }
        for hc in 1..=512 {
            let critic = shapes(&vec![hc; depth], critic_in, 1);
            let count = total(&actor, &critic);
            let gap = count.abs_diff(target);
            if best.as_ref().is_none_or(|(g, _)| gap < *g) {
                best = Some((
                    gap,
                    MatchedShapes {
                        actor: actor.clone(),
                        critic,
                        n_actors,
                        param_count: count,
                    },
                ));
            }
            if count > target {
                break;
            }
        }
    }
    match best {
        Some((gap, shapes)) if gap as f64 <= tolerance => Ok(shapes),
        _ => Err(Error::BudgetInfeasible {
            budget: target,
            minimum,
        }),
    }
}

/// Uniform action; consumes one draw even when `action_dim == 1`.
pub fn random_policy<R: Rng + ?Sized>(action_dim: usize, rng: &mut R) -> usize {
    rng.random_range(0..action_dim.max(1))
}

/// Per-component quantization of an observation into `levels` buckets over
/// `[0, 1]`; values outside are clamped.
pub fn bucket(obs: &[f64], levels: u8) -> Vec<u8> {
    obs.iter()
        .map(|&x| {
            let b = (x.clamp(0.0, 1.0) * f64::from(levels)).floor() as i64;
            b.clamp(0, i64::from(levels) - 1) as u8
        })
        .collect()
}

/// One agent's tabular action values over bucketed observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    n_actions: usize,
    pub learning_rate: f64,
    pub epsilon: f64,
    values: BTreeMap<Vec<u8>, Vec<f64>>,
}

impl QTable {
    pub fn new(n_actions: usize, learning_rate: f64, epsilon: f64) -> Result<Self> {
        if n_actions == 0 {
            return Err(Error::Dimension("Q-table needs at least one action".into()));
        }
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::Config(format!("epsilon must lie in [0, 1], got {epsilon}")));
        }
        if !(learning_rate >= 0.0 && learning_rate.is_finite()) {
            return Err(Error::Config(format!("invalid Q learning rate {learning_rate}")));
        }
        Ok(QTable {
            n_actions,
            learning_rate,
            epsilon,
            values: BTreeMap::new(),
        })
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn q(&self, state: &[u8], action: usize) -> f64 {
        self.values.get(state).map_or(0.0, |row| row[action])
    }

    pub fn max_q(&self, state: &[u8]) -> f64 {
        self.values
            .get(state)
            .map_or(0.0, |row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }

    /// Lowest-index maximizer; unseen states pick action 0.
    pub fn greedy(&self, state: &[u8]) -> usize {
        self.values.get(state).map_or(0, |row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &q)| if q > best.1 { (i, q) } else { best })
                .0
        })
    }

    /// Actions sharing the largest value, or `None` when all of them do
    /// (unseen states included).
    fn maximizers(&self, state: &[u8]) -> Option<Vec<usize>> {
        let row = self.values.get(state)?;
        let max = self.max_q(state);
        let ties: Vec<usize> = (0..self.n_actions).filter(|&a| row[a] == max).collect();
        (ties.len() < self.n_actions).then_some(ties)
    }

    /// ε-greedy behavior action; ties between maximizers are broken
    /// uniformly at random.
    pub fn act<R: Rng + ?Sized>(&self, state: &[u8], rng: &mut R) -> usize {
        if rng.random::<f64>() < self.epsilon {
            return rng.random_range(0..self.n_actions);
        }
        match self.maximizers(state) {
            Some(ties) => ties[rng.random_range(0..ties.len())],
            None => rng.random_range(0..self.n_actions),
        }
    }

    /// Probability of `action` under the ε-greedy behavior policy.
    pub fn behavior_prob(&self, state: &[u8], action: usize) -> f64 {
        let explore = self.epsilon / self.n_actions as f64;
        let greedy = 1.0 - self.epsilon;
        match self.maximizers(state) {
            Some(ties) if ties.contains(&action) => explore + greedy / ties.len() as f64,
            Some(_) => explore,
            None => explore + greedy / self.n_actions as f64,
        }
    }

    pub fn states(&self) -> usize {
        self.values.len()
    }
}

/// One tabular update:
/// `Q(s,a) += lr · (r + γ·max_a' Q(s',a') − Q(s,a))`, with no bootstrap when
/// `next` is `None` (terminal).
pub fn iql_update(
    table: &mut QTable,
    state: &[u8],
    action: usize,
    reward: f64,
    next: Option<&[u8]>,
    gamma: f64,
) -> Result<()> {
    if action >= table.n_actions {
        return Err(Error::Action(format!("action {action} outside 0..{}", table.n_actions)));
    }
    if !reward.is_finite() {
        return Err(Error::Data(format!("non-finite reward {reward}")));
    }
    let bootstrap = next.map_or(0.0, |s| gamma * table.max_q(s));
    let n = table.n_actions;
    let lr = table.learning_rate;
    let row = table.values.entry(state.to_vec()).or_insert_with(|| vec![0.0; n]);
    row[action] += lr * (reward + bootstrap - row[action]);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn zero_net_outputs_zero() {
        let net = DenseNet::zeros(vec![3, 5, 2]).unwrap();
        assert_eq!(dense_forward(&net, &[1.0, -2.0, 0.5]).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(dense_forward(&net, &[1.0]), Err(Error::Dimension(_))));
    }

    #[test]
    fn linear_identity() {
        let net = DenseNet::from_params(vec![1, 1], vec![1.0, 0.0]).unwrap();
        assert_eq!(dense_forward(&net, &[0.37]).unwrap(), vec![0.37]);
        // d(output)/d(weight) = input, d(output)/d(bias) = 1
        let g = dense_backprop(&net, &[0.37], &[1.0]).unwrap();
        assert_eq!(g, vec![0.37, 1.0]);
    }

    #[test]
    fn zero_output_gradient() {
        let net = DenseNet::init(vec![2, 4, 3], &mut rng::stream(1, &[])).unwrap();
        let g = dense_backprop(&net, &[0.3, -0.1], &[0.0; 3]).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn param_count_formula() {
        assert_eq!(dense_param_count(&[4, 4, 4]), 40);
        assert_eq!(DenseNet::zeros(vec![8, 3, 1]).unwrap().param_count(), 31);
    }

    #[test]
    fn matched_presets() {
        let small = build_matched_baseline(&Budget::Small, 4, 4, 2).unwrap();
        assert!((105..=116).contains(&small.param_count), "{small:?}");
        let large = build_matched_baseline(&Budget::Large, 4, 4, 2).unwrap();
        assert!((38_000..=42_000).contains(&large.param_count), "{large:?}");
        let bandit = build_matched_baseline(&Budget::Small, 1, 2, 1).unwrap();
        assert!((105..=116).contains(&bandit.param_count), "{bandit:?}");
    }

    #[test]
    fn matched_budget_infeasible() {
        match build_matched_baseline(&Budget::Small, 1, 1 << 16, 1) {
            Err(Error::BudgetInfeasible { budget, minimum }) => {
                assert_eq!(budget, 110);
                assert!(minimum >= 1 << 16);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn random_policy_single_action() {
        let mut r = rng::stream(0, &[]);
        assert!((0..100).all(|_| random_policy(1, &mut r) == 0));
    }

    #[test]
    fn iql_recurrence() {
        let mut t = QTable::new(2, 0.0, 0.1).unwrap();
        iql_update(&mut t, &[0], 1, 1.0, None, 0.9).unwrap();
        assert_eq!(t.q(&[0], 1), 0.0);

        let mut t = QTable::new(2, 0.25, 0.1).unwrap();
        iql_update(&mut t, &[0], 1, 1.0, None, 0.9).unwrap();
        assert_eq!(t.q(&[0], 1), 0.25);
        assert_eq!(t.greedy(&[0]), 1);
    }

    #[test]
    fn behavior_policy_splits_ties() {
        let mut t = QTable::new(4, 0.5, 0.2).unwrap();
        assert!((t.behavior_prob(&[0], 3) - 0.25).abs() < 1e-15);
        iql_update(&mut t, &[0], 1, 1.0, None, 0.9).unwrap();
        iql_update(&mut t, &[0], 2, 1.0, None, 0.9).unwrap();
        assert!((t.behavior_prob(&[0], 1) - (0.05 + 0.4)).abs() < 1e-15);
        assert!((t.behavior_prob(&[0], 0) - 0.05).abs() < 1e-15);
        let total: f64 = (0..4).map(|a| t.behavior_prob(&[0], a)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let mut r = rng::stream(0, &[]);
        let picks: Vec<usize> = (0..2000).map(|_| t.act(&[0], &mut r)).collect();
        assert!(picks.iter().filter(|&&a| a == 2).count() > 800);
    }

    #[test]
    fn bucket_levels() {
        assert_eq!(bucket(&[0.0, 0.19, 0.2, 0.99, 1.0, -0.3, 1.7], 5), vec![0, 0, 1, 4, 4, 0, 4]);
    }
}
