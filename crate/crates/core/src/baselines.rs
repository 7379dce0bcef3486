//! Comparison schemes: a weighted-score threshold heuristic and a flat,
//! single-level DQN steering agent.

use serde::{Deserialize, Serialize};

use crate::env::{Decision, Observation, SteeringPolicy};
use crate::error::{ConfigError, SteeringError};
use crate::hdqn::{
    encode_meta_state, normalize_sinr, service_reward, RewardWeights, META_STATE_DIM,
};
use crate::radio::Rat;
use crate::rl::{DqnAgent, DqnConfig, Learner, Transition};
use crate::traffic::TrafficType;

/// Relative importance of load, channel and service metrics in `W`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeuristicWeights {
    pub load: f64,
    pub channel: f64,
    pub service: f64,
}

impl Default for HeuristicWeights {
    fn default() -> Self {
        Self {
            load: 1.0 / 3.0,
            channel: 1.0 / 3.0,
            service: 1.0 / 3.0,
        }
    }
}

impl HeuristicWeights {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.load < 0.0 || self.channel < 0.0 || self.service < 0.0 {
            return Err(ConfigError::invalid(
                "heuristic",
                "weights must be non-negative",
            ));
        }
        if (self.load + self.channel + self.service - 1.0).abs() > 1e-9 {
            return Err(ConfigError::invalid("heuristic", "weights must sum to 1"));
        }
        Ok(())
    }
}

/// Preference of each traffic type for each RAT, in [0, 1].
pub fn service_affinity(traffic_type: TrafficType, rat: Rat) -> f64 {
    match (traffic_type, rat) {
        (TrafficType::Voice, Rat::Lte) => 0.8,
        (TrafficType::Voice, Rat::Nr) => 0.5,
        (TrafficType::Video, Rat::Lte) => 0.4,
        (TrafficType::Video, Rat::Nr) => 0.9,
        (TrafficType::Gaming, Rat::Lte) => 0.5,
        (TrafficType::Gaming, Rat::Nr) => 0.8,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatMetrics {
    pub load: f64,
    pub channel: f64,
    pub service: f64,
}

/// Higher is better for all three: spare queue, link quality, service fit.
pub fn rat_metrics(obs: &Observation, rat: Rat) -> RatMetrics {
    RatMetrics {
        load: 1.0 - obs.occupancy[rat.index()].clamp(0.0, 1.0),
        channel: normalize_sinr(obs.sinr_db[rat.index()]),
        service: service_affinity(obs.traffic_type, rat),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatScore {
    pub rat: Rat,
    pub metrics: RatMetrics,
    /// Weighted score `W`.
    pub w_score: f64,
    /// Unweighted mean `T_th`.
    pub t_th: f64,
}

impl RatScore {
    pub fn new(rat: Rat, metrics: RatMetrics, weights: &HeuristicWeights) -> Self {
        let m = metrics;
        Self {
            rat,
            metrics,
            w_score: weights.load * m.load
                + weights.channel * m.channel
                + weights.service * m.service,
            t_th: (m.load + m.channel + m.service) / 3.0,
        }
    }

    /// `W` exceeds `T_th` by more than rounding noise.
    pub fn exceeds(&self) -> bool {
        self.w_score - self.t_th > EXCEEDANCE_EPS
    }
}

/// Differences below this are treated as ties so that equal weights never
/// produce a spurious exceedance from floating-point rounding.
const EXCEEDANCE_EPS: f64 = 1e-12;

/// Prefers RATs whose weighted score beats their threshold; among those (or
/// among all, if none qualifies) the larger `W` wins, LTE on exact ties.
pub fn heuristic_decide(lte: &RatScore, nr: &RatScore) -> Rat {
    let pick_larger = |a: &RatScore, b: &RatScore| {
        if b.w_score - a.w_score > EXCEEDANCE_EPS {
            b.rat
        } else {
            a.rat
        }
    };
    match (lte.exceeds(), nr.exceeds()) {
        (true, false) => Rat::Lte,
        (false, true) => Rat::Nr,
        _ => pick_larger(lte, nr),
    }
}

#[derive(Debug, Clone, Default)]
pub struct HeuristicPolicy {
    pub weights: HeuristicWeights,
}

impl HeuristicPolicy {
    pub fn new(weights: HeuristicWeights) -> Self {
        Self { weights }
    }

    pub fn choose(&self, obs: &Observation) -> Rat {
        let lte = RatScore::new(Rat::Lte, rat_metrics(obs, Rat::Lte), &self.weights);
        let nr = RatScore::new(Rat::Nr, rat_metrics(obs, Rat::Nr), &self.weights);
        heuristic_decide(&lte, &nr)
    }
}

impl SteeringPolicy for HeuristicPolicy {
    fn name(&self) -> &'static str {
        "heuristic"
    }

    fn begin_episode(&mut self, _n_ues: usize, _training: bool) {}

    fn decide(&mut self, obs: &Observation) -> Result<Decision, SteeringError> {
        Ok(Decision {
            rat: self.choose(obs),
            goal: None,
            reward: None,
        })
    }

    fn end_episode(&mut self, _final_obs: &[Observation]) -> Result<(), SteeringError> {
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct PendingFlat {
    state: [f64; META_STATE_DIM],
    action: Rat,
}

/// Single-level DQN over the 7-dimensional state with actions {LTE, NR}.
/// Its reward is the service part of the intrinsic reward; there is no goal
/// and hence no goal-miss penalty.
#[derive(Debug, Clone)]
pub struct FlatDqnAgent {
    learner: Learner,
    reward: RewardWeights,
    pending: Vec<Option<PendingFlat>>,
    training: bool,
    transitions: u64,
}

pub fn build_flat_dqn(config: DqnConfig, reward: RewardWeights, seed: u64) -> FlatDqnAgent {
    FlatDqnAgent::from_agent(DqnAgent::new(META_STATE_DIM, 2, config, seed), reward)
}

impl FlatDqnAgent {
    pub fn from_agent(agent: DqnAgent, reward: RewardWeights) -> Self {
        assert_eq!(agent.n_inputs(), META_STATE_DIM);
        assert_eq!(agent.n_actions(), 2);
        Self {
            learner: Learner::new(agent),
            reward,
            pending: Vec::new(),
            training: true,
            transitions: 0,
        }
    }

    pub fn agent(&self) -> &DqnAgent {
        &self.learner.agent
    }

    pub fn learner(&self) -> &Learner {
        &self.learner
    }

    pub fn transitions(&self) -> u64 {
        self.transitions
    }

    pub fn encode(obs: &Observation) -> [f64; META_STATE_DIM] {
        encode_meta_state(obs).to_array()
    }

    fn settle(
        &mut self,
        obs: &Observation,
        state: &[f64; META_STATE_DIM],
        terminal: bool,
    ) -> Result<Option<f64>, SteeringError> {
        let Some(prev) = self.pending.get_mut(obs.ue_id).and_then(Option::take) else {
            return Ok(None);
        };
        let reward = service_reward(&obs.window, &obs.qos, &self.reward);
        self.transitions += 1;
        if self.training {
            self.learner.observe(Transition {
                state: prev.state.to_vec(),
                action: prev.action.index(),
                reward,
                next_state: state.to_vec(),
                done: terminal,
            })?;
        }
        Ok(Some(reward))
    }
}

impl SteeringPolicy for FlatDqnAgent {
    fn name(&self) -> &'static str {
        "dqn"
    }

    fn begin_episode(&mut self, n_ues: usize, training: bool) {
        self.training = training;
        self.pending = vec![None; n_ues];
    }

    fn decide(&mut self, obs: &Observation) -> Result<Decision, SteeringError> {
        let state = Self::encode(obs);
        let reward = self.settle(obs, &state, false)?;
        let action =
            Rat::from_index(self.learner.act(&state, self.training)?).expect("two actions");
        if self.pending.len() <= obs.ue_id {
            self.pending.resize(obs.ue_id + 1, None);
        }
        self.pending[obs.ue_id] = Some(PendingFlat { state, action });
        Ok(Decision {
            rat: action,
            goal: None,
            reward,
        })
    }

    fn end_episode(&mut self, final_obs: &[Observation]) -> Result<(), SteeringError> {
        for obs in final_obs {
            let state = Self::encode(obs);
            self.settle(obs, &state, true)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::queue::MetricsWindow;
    use crate::rl::{Dense, Mlp};
    use crate::traffic::qos_spec;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn obs(traffic_type: TrafficType, sinr: [f64; 2], occupancy: [f64; 2]) -> Observation {
        Observation {
            tti: 0,
            ue_id: 0,
            traffic_type,
            qos: qos_spec(traffic_type),
            sinr_db: sinr,
            rate_bps: [1e7, 1e7],
            occupancy,
            current: None,
            window: MetricsWindow::default(),
        }
    }

    fn score(rat: Rat, load: f64, channel: f64, service: f64, w: &HeuristicWeights) -> RatScore {
        RatScore::new(
            rat,
            RatMetrics {
                load,
                channel,
                service,
            },
            w,
        )
    }

    #[test]
    fn metric_examples() {
        let o = obs(TrafficType::Video, [40.0, 15.0], [0.0, 0.25]);
        let lte = rat_metrics(&o, Rat::Lte);
        assert_eq!(lte.load, 1.0);
        assert_eq!(lte.channel, 1.0);
        let nr = rat_metrics(&o, Rat::Nr);
        assert_eq!(nr.service, 0.9);
        assert_eq!(nr.load, 0.75);
        assert_eq!(nr.channel, 0.5);
    }

    #[test]
    fn equal_metrics_tie_to_lte() {
        let w = HeuristicWeights::default();
        let lte = score(Rat::Lte, 0.5, 0.5, 0.5, &w);
        let nr = score(Rat::Nr, 0.5, 0.5, 0.5, &w);
        assert!(!lte.exceeds() && !nr.exceeds());
        assert_eq!(heuristic_decide(&lte, &nr), Rat::Lte);
    }

    #[test]
    fn dominant_nr_wins() {
        for w in [
            HeuristicWeights::default(),
            HeuristicWeights {
                load: 0.5,
                channel: 0.3,
                service: 0.2,
            },
        ] {
            let lte = score(Rat::Lte, 0.0, 0.0, 0.0, &w);
            let nr = score(Rat::Nr, 1.0, 1.0, 1.0, &w);
            assert_eq!(heuristic_decide(&lte, &nr), Rat::Nr);
        }
    }

    #[test]
    fn weighted_hand_example() {
        let w = HeuristicWeights {
            load: 0.6,
            channel: 0.2,
            service: 0.2,
        };
        let lte = score(Rat::Lte, 0.9, 0.3, 0.3, &w);
        let nr = score(Rat::Nr, 0.4, 0.8, 0.8, &w);
        assert_abs_diff_eq!(lte.w_score, 0.66, epsilon = 1e-12);
        assert_abs_diff_eq!(lte.t_th, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(nr.w_score, 0.56, epsilon = 1e-12);
        assert_abs_diff_eq!(nr.t_th, 2.0 / 3.0, epsilon = 1e-12);
        assert_eq!(heuristic_decide(&lte, &nr), Rat::Lte);
    }

    #[test]
    fn flat_dqn_shape() {
        let a = build_flat_dqn(DqnConfig::default(), RewardWeights::default(), 1);
        assert_eq!(a.agent().n_inputs(), 7);
        assert_eq!(a.agent().n_actions(), 2);
    }

    #[test]
    fn flat_dqn_follows_hand_set_q() {
        let net = Mlp::from_layers(vec![Dense {
            n_in: 7,
            n_out: 2,
            weights: vec![0.0; 14],
            bias: vec![0.0, 1.0],
        }])
        .unwrap();
        let cfg = DqnConfig {
            epsilon_start: 0.0,
            epsilon_end: 0.0,
            ..Default::default()
        };
        let mut a = FlatDqnAgent::from_agent(
            DqnAgent::from_network(net, cfg, 0),
            RewardWeights::default(),
        );
        a.begin_episode(1, false);
        for t in TrafficType::ALL {
            let d = a.decide(&obs(t, [10.0, -5.0], [0.0, 0.9])).unwrap();
            assert_eq!(d.rat, Rat::Nr);
        }
    }

    #[test]
    fn flat_dqn_is_deterministic() {
        let run = || {
            let mut a = build_flat_dqn(
                DqnConfig {
                    batch_size: 8,
                    ..Default::default()
                },
                RewardWeights::default(),
                4,
            );
            a.begin_episode(1, true);
            let mut out = Vec::new();
            for k in 0..200 {
                let mut o = obs(
                    TrafficType::Gaming,
                    [20.0, (k % 30) as f64],
                    [0.1, (k % 10) as f64 / 10.0],
                );
                o.window = MetricsWindow {
                    window_ttis: 50,
                    avg_throughput_bps: 1e4,
                    avg_delay_ms: (k % 7) as f64,
                    drop_ratio: 0.0,
                };
                out.push(a.decide(&o).unwrap().rat);
            }
            (out, a.agent().online().clone())
        };
        assert_eq!(run(), run());
    }

    proptest! {
        #[test]
        fn threshold_ignores_weights(
            m in (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0),
            w in (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0),
        ) {
            let total = w.0 + w.1 + w.2 + 1e-9;
            let weights = HeuristicWeights { load: w.0 / total, channel: w.1 / total, service: w.2 / total };
            let a = score(Rat::Lte, m.0, m.1, m.2, &weights);
            let b = score(Rat::Lte, m.0, m.1, m.2, &HeuristicWeights::default());
            prop_assert_eq!(a.t_th, b.t_th);
        }

        #[test]
        fn argmax_w_invariant_under_weight_scaling(
            lte in (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0),
            nr in (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0),
            scale in 0.01f64..100.0,
        ) {
            let w = HeuristicWeights { load: 0.5, channel: 0.3, service: 0.2 };
            let ws = HeuristicWeights { load: 0.5 * scale, channel: 0.3 * scale, service: 0.2 * scale };
            let pick = |w: &HeuristicWeights| {
                let a = score(Rat::Lte, lte.0, lte.1, lte.2, w).w_score;
                let b = score(Rat::Nr, nr.0, nr.1, nr.2, w).w_score;
                (b - a).abs() < 1e-9 || b > a
            };
            let (a, b) = (score(Rat::Lte, lte.0, lte.1, lte.2, &w).w_score, score(Rat::Nr, nr.0, nr.1, nr.2, &w).w_score);
            prop_assume!((a - b).abs() > 1e-9);
            prop_assert_eq!(pick(&w), pick(&ws));
        }

        #[test]
        fn heuristic_is_pure(
            lte in (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0),
            nr in (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0),
        ) {
            let w = HeuristicWeights { load: 0.5, channel: 0.3, service: 0.2 };
            let l = score(Rat::Lte, lte.0, lte.1, lte.2, &w);
            let n = score(Rat::Nr, nr.0, nr.1, nr.2, &w);
            prop_assert_eq!(heuristic_decide(&l, &n), heuristic_decide(&l, &n));
        }
    }
}
