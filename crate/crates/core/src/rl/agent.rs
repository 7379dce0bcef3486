use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use super::replay::{ReplayBuffer, Transition};
use crate::error::RlError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DqnConfig {
    pub hidden_layers: Vec<usize>,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_steps: u64,
    pub learning_rate: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub target_sync_steps: u64,
    pub grad_clip_norm: f64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            hidden_layers: vec![64, 64],
            gamma: 0.95,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: 20_000,
            learning_rate: 1e-3,
            replay_capacity: 50_000,
            batch_size: 64,
            target_sync_steps: 500,
            grad_clip_norm: 10.0,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self, section: &str) -> Result<(), crate::error::ConfigError> {
        use crate::error::ConfigError;
        let key = |k: &str| format!("{section}.{k}");
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(ConfigError::invalid(key("gamma"), "must lie in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.epsilon_end)
            || !(self.epsilon_end..=1.0).contains(&self.epsilon_start)
        {
            return Err(ConfigError::invalid(
                key("epsilon_start"),
                "need 0 <= epsilon_end <= epsilon_start <= 1",
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(ConfigError::invalid(
                key("learning_rate"),
                "must be positive",
            ));
        }
        if self.replay_capacity == 0 || self.batch_size == 0 || self.target_sync_steps == 0 {
            return Err(ConfigError::invalid(
                key("batch_size"),
                "replay_capacity, batch_size and target_sync_steps must be >= 1",
            ));
        }
        if self.hidden_layers.contains(&0) {
            return Err(ConfigError::invalid(
                key("hidden_layers"),
                "layer widths must be >= 1",
            ));
        }
        if !(self.grad_clip_norm > 0.0) {
            return Err(ConfigError::invalid(
                key("grad_clip_norm"),
                "must be positive",
            ));
        }
        Ok(())
    }
}

/// Epsilon-greedy DQN with a periodically synchronized target network.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    online: Mlp,
    target: Mlp,
    config: DqnConfig,
    rng: ChaCha8Rng,
}

impl DqnAgent {
    pub fn new(n_inputs: usize, n_actions: usize, config: DqnConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes: Vec<usize> = std::iter::once(n_inputs)
            .chain(config.hidden_layers.iter().copied())
            .chain(std::iter::once(n_actions))
            .collect();
        let online = Mlp::new(&sizes, &mut rng);
        Self {
            target: online.clone(),
            online,
            config,
            rng,
        }
    }

    /// Wraps an existing network; the target starts as a copy of it.
    pub fn from_network(online: Mlp, config: DqnConfig, seed: u64) -> Self {
        Self {
            target: online.clone(),
            online,
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn config(&self) -> &DqnConfig {
        &self.config
    }

    pub fn online(&self) -> &Mlp {
        &self.online
    }

    pub fn online_mut(&mut self) -> &mut Mlp {
        &mut self.online
    }

    pub fn target(&self) -> &Mlp {
        &self.target
    }

    pub fn n_inputs(&self) -> usize {
        self.online.n_inputs()
    }

    pub fn n_actions(&self) -> usize {
        self.online.n_outputs()
    }

    /// Linear decay from `epsilon_start` to `epsilon_end`.
    pub fn epsilon(&self, step: u64) -> f64 {
        let c = &self.config;
        if c.epsilon_decay_steps == 0 {
            return c.epsilon_end;
        }
        if step >= c.epsilon_decay_steps {
            return c.epsilon_end;
        }
        let frac = step as f64 / c.epsilon_decay_steps as f64;
        c.epsilon_start + (c.epsilon_end - c.epsilon_start) * frac
    }

    pub fn q_values(&self, state: &[f64]) -> Result<Vec<f64>, RlError> {
        self.online.forward(state)
    }

    pub fn greedy_action(&self, state: &[f64]) -> Result<usize, RlError> {
        Ok(argmax(&self.q_values(state)?))
    }

    pub fn select_action(&mut self, state: &[f64], step: u64) -> Result<usize, RlError> {
        let q = self.q_values(state)?;
        if self.rng.random::<f64>() < self.epsilon(step) {
            Ok(self.rng.random_range(0..q.len()))
        } else {
            Ok(argmax(&q))
        }
    }

    /// `y = r` for terminal transitions, else `r + gamma * max_a Q_target(s', a)`.
    pub fn td_targets(&self, batch: &[&Transition]) -> Result<Vec<f64>, RlError> {
        batch
            .iter()
            .map(|t| {
                if t.done {
                    Ok(t.reward)
                } else {
                    let next = self.target.forward(&t.next_state)?;
                    let best = next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    Ok(t.reward + self.config.gamma * best)
                }
            })
            .collect()
    }

    /// One minibatch SGD step. Returns `Ok(None)` without touching any state
    /// when the buffer holds fewer than `batch_size` transitions.
    pub fn learn_batch(
        &mut self,
        buffer: &ReplayBuffer,
        batch_size: usize,
        global_step: u64,
    ) -> Result<Option<f64>, RlError> {
        if buffer.len() < batch_size || batch_size == 0 {
            return Ok(None);
        }
        let batch = buffer.sample(batch_size, &mut self.rng);
        let targets = self.td_targets(&batch)?;
        let inputs: Vec<&[f64]> = batch.iter().map(|t| t.state.as_slice()).collect();
        let actions: Vec<usize> = batch.iter().map(|t| t.action).collect();
        let (loss, mut grads) = self
            .online
            .loss_and_gradients(&inputs, &actions, &targets)?;
        let norm = grads.squared_norm().sqrt();
        if !norm.is_finite() {
            return Err(RlError::NonFiniteGradient);
        }
        if norm > self.config.grad_clip_norm {
            grads.scale(self.config.grad_clip_norm / norm);
        }
        self.online
            .apply_update(&grads, self.config.learning_rate)?;
        if global_step % self.config.target_sync_steps == 0 {
            self.sync_target();
        }
        Ok(Some(loss))
    }

    pub fn sync_target(&mut self) {
        self.target = self.online.clone();
    }
}

/// Index of the largest value; lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// An agent together with its replay memory and step counter.
#[derive(Debug, Clone)]
pub struct Learner {
    pub agent: DqnAgent,
    pub buffer: ReplayBuffer,
    /// Transitions observed so far; drives epsilon decay and target sync.
    pub steps: u64,
}

impl Learner {
    pub fn new(agent: DqnAgent) -> Self {
        let buffer = ReplayBuffer::new(agent.config().replay_capacity);
        Self {
            agent,
            buffer,
            steps: 0,
        }
    }

    pub fn act(&mut self, state: &[f64], explore: bool) -> Result<usize, RlError> {
        if explore {
            self.agent.select_action(state, self.steps)
        } else {
            self.agent.greedy_action(state)
        }
    }

    /// Stores the transition and runs one learning step.
    pub fn observe(&mut self, t: Transition) -> Result<Option<f64>, RlError> {
        if t.state.len() != self.agent.n_inputs() || t.next_state.len() != self.agent.n_inputs() {
            return Err(RlError::DimensionMismatch {
                expected: self.agent.n_inputs(),
                got: t.state.len(),
            });
        }
        self.buffer.push(t);
        self.steps += 1;
        let batch = self.agent.config().batch_size;
        self.agent.learn_batch(&self.buffer, batch, self.steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rl::mlp::Dense;
    use approx::assert_abs_diff_eq;

    fn greedy_config() -> DqnConfig {
        DqnConfig {
            epsilon_start: 0.0,
            epsilon_end: 0.0,
            ..Default::default()
        }
    }

    /// Single linear layer whose output is exactly `q` for any input.
    fn constant_q(n_in: usize, q: &[f64]) -> Mlp {
        let layer = Dense {
            n_in,
            n_out: q.len(),
            weights: vec![0.0; n_in * q.len()],
            bias: q.to_vec(),
        };
        Mlp::from_layers(vec![layer]).unwrap()
    }

    #[test]
    fn greedy_picks_argmax() {
        let mut a = DqnAgent::from_network(constant_q(2, &[1.0, 3.0, 2.0]), greedy_config(), 0);
        assert_eq!(a.select_action(&[0.0, 0.0], 0).unwrap(), 1);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let mut a = DqnAgent::from_network(constant_q(2, &[2.0, 2.0]), greedy_config(), 0);
        assert_eq!(a.select_action(&[0.0, 0.0], 0).unwrap(), 0);
        assert_eq!(argmax(&[0.1, 0.9, 0.9]), 1);
    }

    #[test]
    fn full_exploration_is_uniform() {
        let cfg = DqnConfig {
            epsilon_start: 1.0,
            epsilon_end: 1.0,
            ..Default::default()
        };
        let mut a = DqnAgent::from_network(constant_q(1, &[0.0, 5.0, 0.0, 0.0]), cfg, 17);
        let mut counts = [0usize; 4];
        for _ in 0..10_000 {
            counts[a.select_action(&[0.0], 0).unwrap()] += 1;
        }
        for c in counts {
            let f = c as f64 / 10_000.0;
            assert!((0.23..=0.27).contains(&f), "frequency {f}");
        }
    }

    #[test]
    fn epsilon_schedule_is_linear_and_bounded() {
        let a = DqnAgent::new(2, 2, DqnConfig::default(), 0);
        assert_eq!(a.epsilon(0), 1.0);
        assert_abs_diff_eq!(a.epsilon(10_000), 0.525, epsilon = 1e-12);
        assert_eq!(a.epsilon(20_000), 0.05);
        assert_eq!(a.epsilon(1_000_000), 0.05);
    }

    #[test]
    fn td_target_examples() {
        let agent = DqnAgent::from_network(
            constant_q(1, &[2.0, -1.0]),
            DqnConfig {
                gamma: 0.9,
                ..Default::default()
            },
            0,
        );
        let done = Transition {
            state: vec![0.0],
            action: 0,
            reward: 5.0,
            next_state: vec![0.0],
            done: true,
        };
        let live = Transition {
            state: vec![0.0],
            action: 0,
            reward: 1.0,
            next_state: vec![0.0],
            done: false,
        };
        let y = agent.td_targets(&[&done, &live]).unwrap();
        assert_eq!(y[0], 5.0);
        assert_abs_diff_eq!(y[1], 2.8, epsilon = 1e-12);

        let myopic = DqnAgent::from_network(
            constant_q(1, &[2.0, -1.0]),
            DqnConfig {
                gamma: 0.0,
                ..Default::default()
            },
            0,
        );
        assert_eq!(myopic.td_targets(&[&live]).unwrap(), vec![1.0]);
    }

    fn filled_buffer(n: usize) -> ReplayBuffer {
        let mut buf = ReplayBuffer::new(1000);
        for i in 0..n {
            let x = (i % 7) as f64 / 7.0;
            buf.push(Transition {
                state: vec![x, 1.0 - x],
                action: i % 2,
                reward: x,
                next_state: vec![1.0 - x, x],
                done: i % 5 == 0,
            });
        }
        buf
    }

    #[test]
    fn small_buffer_skips_learning() {
        let mut a = DqnAgent::new(2, 2, DqnConfig::default(), 3);
        let before = a.online().clone();
        assert_eq!(a.learn_batch(&filled_buffer(10), 64, 1).unwrap(), None);
        assert_eq!(a.online(), &before);
    }

    #[test]
    fn sync_every_step_keeps_target_equal() {
        let cfg = DqnConfig {
            target_sync_steps: 1,
            learning_rate: 0.05,
            ..Default::default()
        };
        let mut a = DqnAgent::new(2, 2, cfg, 3);
        let buf = filled_buffer(100);
        for step in 1..20 {
            a.learn_batch(&buf, 16, step).unwrap();
            assert_eq!(a.online(), a.target());
        }
    }

    #[test]
    fn target_lags_until_sync() {
        let cfg = DqnConfig {
            target_sync_steps: 5,
            learning_rate: 0.05,
            ..Default::default()
        };
        let mut a = DqnAgent::new(2, 2, cfg, 3);
        let buf = filled_buffer(100);
        let initial = a.target().clone();
        for step in 1..5 {
            a.learn_batch(&buf, 16, step).unwrap();
            assert_eq!(a.target(), &initial);
        }
        a.learn_batch(&buf, 16, 5).unwrap();
        assert_eq!(a.target(), a.online());
    }

    #[test]
    fn learning_is_deterministic() {
        let buf = filled_buffer(200);
        let losses = || {
            let mut a = DqnAgent::new(
                2,
                2,
                DqnConfig {
                    learning_rate: 0.01,
                    ..Default::default()
                },
                9,
            );
            (1..50)
                .map(|s| a.learn_batch(&buf, 32, s).unwrap().unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(losses(), losses());
    }
}
