//! Hierarchical DQN traffic steering.
//!
//! The meta-controller (rApp role) picks a queue-occupancy threshold for a
//! flow and keeps it for a goal epoch. The controller (xApp role) admits the
//! flow to LTE or NR at every decision step, conditioned on that threshold.
//! After each controller step the internal critic checks whether the chosen
//! RAT's queue stayed at or below the threshold and pays an intrinsic reward
//! built from the flow's throughput and delay. An epoch ends when the goal is
//! met, after `max_epoch_steps` controller steps, or at episode end; the
//! meta-controller is then paid the mean intrinsic reward of the epoch.
//!
//! Epochs are tracked per UE, so many flows can be mid-epoch at once while
//! sharing one meta network and one controller network.

use serde::{Deserialize, Serialize};

use crate::env::{Decision, Observation, SteeringPolicy};
use crate::error::{ConfigError, SteeringError};
use crate::queue::MetricsWindow;
use crate::radio::Rat;
use crate::rl::{DqnAgent, DqnConfig, Learner, Transition};
use crate::traffic::{QoSSpec, TrafficType};

pub const GOAL_THRESHOLDS: [f64; 5] = [0.5, 0.6, 0.7, 0.8, 0.9];
pub const SINR_NORM_MIN_DB: f64 = -10.0;
pub const SINR_NORM_MAX_DB: f64 = 40.0;
pub const META_STATE_DIM: usize = 7;
pub const CONTROLLER_INPUT_DIM: usize = META_STATE_DIM + GOAL_THRESHOLDS.len();

pub fn normalize_sinr(sinr_db: f64) -> f64 {
    ((sinr_db - SINR_NORM_MIN_DB) / (SINR_NORM_MAX_DB - SINR_NORM_MIN_DB)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetaState {
    pub traffic_type: TrafficType,
    pub sinr_lte_norm: f64,
    pub sinr_nr_norm: f64,
    pub occupancy_lte: f64,
    pub occupancy_nr: f64,
}

impl MetaState {
    pub fn to_array(&self) -> [f64; META_STATE_DIM] {
        let mut onehot = [0.0; 3];
        onehot[self.traffic_type.index()] = 1.0;
        [
            onehot[0],
            onehot[1],
            onehot[2],
            self.sinr_lte_norm,
            self.sinr_nr_norm,
            self.occupancy_lte,
            self.occupancy_nr,
        ]
    }

    pub fn occupancy(&self, rat: Rat) -> f64 {
        match rat {
            Rat::Lte => self.occupancy_lte,
            Rat::Nr => self.occupancy_nr,
        }
    }
}

pub fn encode_meta_state(obs: &Observation) -> MetaState {
    MetaState {
        traffic_type: obs.traffic_type,
        sinr_lte_norm: normalize_sinr(obs.sinr_db[Rat::Lte.index()]),
        sinr_nr_norm: normalize_sinr(obs.sinr_db[Rat::Nr.index()]),
        occupancy_lte: obs.occupancy[Rat::Lte.index()].clamp(0.0, 1.0),
        occupancy_nr: obs.occupancy[Rat::Nr.index()].clamp(0.0, 1.0),
    }
}

/// Index into [`GOAL_THRESHOLDS`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Goal(usize);

impl Goal {
    pub fn from_index(index: usize) -> Option<Goal> {
        (index < GOAL_THRESHOLDS.len()).then_some(Goal(index))
    }

    pub fn index(self) -> usize {
        self.0
    }

    pub fn threshold(self) -> f64 {
        GOAL_THRESHOLDS[self.0]
    }
}

/// State followed by the one-hot goal.
pub fn encode_controller_input(state: &MetaState, goal: Goal) -> [f64; CONTROLLER_INPUT_DIM] {
    let mut out = [0.0; CONTROLLER_INPUT_DIM];
    out[..META_STATE_DIM].copy_from_slice(&state.to_array());
    out[META_STATE_DIM + goal.index()] = 1.0;
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub throughput: f64,
    pub delay: f64,
    pub goal_miss_penalty: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            throughput: 1.0,
            delay: 1.0,
            goal_miss_penalty: 0.5,
        }
    }
}

/// Throughput credit minus delay cost, each normalized by the flow's QoS.
pub fn service_reward(window: &MetricsWindow, qos: &QoSSpec, weights: &RewardWeights) -> f64 {
    let thr = (window.avg_throughput_bps / qos.nominal_rate_bps).clamp(0.0, 1.0);
    let delay = (window.avg_delay_ms / qos.delay_budget_ms).clamp(0.0, 1.0);
    weights.throughput * thr - weights.delay * delay
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticOutcome {
    pub achieved: bool,
    pub intrinsic: f64,
}

/// The goal is achieved when the chosen RAT's queue occupancy is at or below
/// the threshold. Missing it costs `goal_miss_penalty`.
pub fn internal_critic(
    chosen_occupancy: f64,
    goal: Goal,
    window: &MetricsWindow,
    qos: &QoSSpec,
    weights: &RewardWeights,
) -> CriticOutcome {
    let achieved = chosen_occupancy <= goal.threshold();
    let penalty = if achieved {
        0.0
    } else {
        weights.goal_miss_penalty
    };
    CriticOutcome {
        achieved,
        intrinsic: service_reward(window, qos, weights) - penalty,
    }
}

/// Mean intrinsic reward of a goal epoch.
pub fn extrinsic_reward(history: &[f64]) -> Result<f64, SteeringError> {
    if history.is_empty() {
        return Err(SteeringError::EmptyEpoch);
    }
    Ok(history.iter().sum::<f64>() / history.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HdqnConfig {
    pub meta: DqnConfig,
    pub controller: DqnConfig,
    /// Goal epoch timeout, in controller steps.
    pub max_epoch_steps: usize,
    pub reward: RewardWeights,
}

impl Default for HdqnConfig {
    fn default() -> Self {
        Self {
            meta: DqnConfig::default(),
            controller: DqnConfig::default(),
            max_epoch_steps: 20,
            reward: RewardWeights::default(),
        }
    }
}

impl HdqnConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.meta.validate("hdqn.meta")?;
        self.controller.validate("hdqn.controller")?;
        if self.max_epoch_steps == 0 {
            return Err(ConfigError::invalid(
                "hdqn.max_epoch_steps",
                "must be at least 1",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpochEnd {
    Achieved,
    Timeout,
    EpisodeEnd,
}

/// One completed controller step, logged when its critic verdict is known.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub ue_id: usize,
    pub epoch_id: u64,
    pub decided_tti: u64,
    pub completed_tti: u64,
    pub goal: Goal,
    pub action: Rat,
    /// Occupancy of the chosen RAT's queue that the critic compared.
    pub chosen_occupancy: f64,
    pub achieved: bool,
    pub intrinsic: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch_id: u64,
    pub ue_id: usize,
    pub goal: Goal,
    pub start_tti: u64,
    pub end_tti: u64,
    pub intrinsics: Vec<f64>,
    pub extrinsic: f64,
    pub end: EpochEnd,
}

impl EpochRecord {
    pub fn len(&self) -> usize {
        self.intrinsics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intrinsics.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct HdqnLog {
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
    pub meta_decisions: u64,
    pub controller_decisions: u64,
    pub meta_transitions: u64,
    pub controller_transitions: u64,
}

#[derive(Debug, Clone)]
struct GoalEpoch {
    id: u64,
    goal: Goal,
    start_state: MetaState,
    start_tti: u64,
    intrinsics: Vec<f64>,
}

#[derive(Debug, Clone)]
struct PendingStep {
    input: [f64; CONTROLLER_INPUT_DIM],
    action: Rat,
    tti: u64,
}

#[derive(Debug, Clone, Default)]
struct FlowSlot {
    epoch: Option<GoalEpoch>,
    pending: Option<PendingStep>,
}

#[derive(Debug, Clone)]
pub struct HdqnAgent {
    meta: Learner,
    controller: Learner,
    config: HdqnConfig,
    slots: Vec<FlowSlot>,
    training: bool,
    next_epoch_id: u64,
    log: HdqnLog,
}

/// What one controller decision step did.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub action: Rat,
    pub goal: Goal,
    pub new_goal: bool,
    pub completed: Option<StepRecord>,
    pub closed_epoch: Option<EpochRecord>,
}

impl HdqnAgent {
    pub fn new(config: HdqnConfig, meta_seed: u64, controller_seed: u64) -> Self {
        let meta = DqnAgent::new(
            META_STATE_DIM,
            GOAL_THRESHOLDS.len(),
            config.meta.clone(),
            meta_seed,
        );
        let controller = DqnAgent::new(
            CONTROLLER_INPUT_DIM,
            2,
            config.controller.clone(),
            controller_seed,
        );
        Self::from_agents(config, meta, controller)
    }

    pub fn from_agents(config: HdqnConfig, meta: DqnAgent, controller: DqnAgent) -> Self {
        assert_eq!(meta.n_inputs(), META_STATE_DIM);
        assert_eq!(meta.n_actions(), GOAL_THRESHOLDS.len());
        assert_eq!(controller.n_inputs(), CONTROLLER_INPUT_DIM);
        assert_eq!(controller.n_actions(), 2);
        Self {
            meta: Learner::new(meta),
            controller: Learner::new(controller),
            config,
            slots: Vec::new(),
            training: true,
            next_epoch_id: 0,
            log: HdqnLog::default(),
        }
    }

    pub fn meta(&self) -> &DqnAgent {
        &self.meta.agent
    }

    pub fn controller(&self) -> &DqnAgent {
        &self.controller.agent
    }

    pub fn meta_learner(&self) -> &Learner {
        &self.meta
    }

    pub fn controller_learner(&self) -> &Learner {
        &self.controller
    }

    pub fn log(&self) -> &HdqnLog {
        &self.log
    }

    pub fn take_log(&mut self) -> HdqnLog {
        std::mem::take(&mut self.log)
    }

    pub fn set_training(&mut self, training: bool) {
        self.training = training;
    }

    pub fn active_goal(&self, ue_id: usize) -> Option<Goal> {
        self.slots.get(ue_id)?.epoch.as_ref().map(|e| e.goal)
    }

    /// Epsilon-greedy goal choice from the meta network.
    pub fn select_goal(&mut self, state: &MetaState) -> Result<Goal, SteeringError> {
        let idx = self.meta.act(&state.to_array(), self.training)?;
        Ok(Goal(idx))
    }

    fn slot(&mut self, ue_id: usize) -> &mut FlowSlot {
        if self.slots.len() <= ue_id {
            self.slots.resize_with(ue_id + 1, FlowSlot::default);
        }
        &mut self.slots[ue_id]
    }

    /// Scores the flow's previous controller step against the state now
    /// observed, and closes the goal epoch if it is over.
    fn complete_pending(
        &mut self,
        obs: &Observation,
        state: &MetaState,
        terminal: bool,
    ) -> Result<(Option<StepRecord>, Option<EpochRecord>), SteeringError> {
        let max_steps = self.config.max_epoch_steps;
        let weights = self.config.reward;
        let Some(pending) = self.slot(obs.ue_id).pending.take() else {
            return Ok((None, None));
        };
        let mut epoch = self
            .slot(obs.ue_id)
            .epoch
            .take()
            .expect("pending step without an epoch");

        let chosen_occupancy = state.occupancy(pending.action);
        let verdict = internal_critic(
            chosen_occupancy,
            epoch.goal,
            &obs.window,
            &obs.qos,
            &weights,
        );
        epoch.intrinsics.push(verdict.intrinsic);

        let next_input = encode_controller_input(state, epoch.goal);
        self.log.controller_transitions += 1;
        if self.training {
            self.controller.observe(Transition {
                state: pending.input.to_vec(),
                action: pending.action.index(),
                reward: verdict.intrinsic,
                next_state: next_input.to_vec(),
                done: verdict.achieved || terminal,
            })?;
        }
        let record = StepRecord {
            ue_id: obs.ue_id,
            epoch_id: epoch.id,
            decided_tti: pending.tti,
            completed_tti: obs.tti,
            goal: epoch.goal,
            action: pending.action,
            chosen_occupancy,
            achieved: verdict.achieved,
            intrinsic: verdict.intrinsic,
        };
        self.log.steps.push(record.clone());

        let end = if terminal {
            Some(EpochEnd::EpisodeEnd)
        } else if verdict.achieved {
            Some(EpochEnd::Achieved)
        } else if epoch.intrinsics.len() >= max_steps {
            Some(EpochEnd::Timeout)
        } else {
            None
        };
        let Some(end) = end else {
            self.slot(obs.ue_id).epoch = Some(epoch);
            return Ok((Some(record), None));
        };

        let extrinsic = extrinsic_reward(&epoch.intrinsics)?;
        self.log.meta_transitions += 1;
        if self.training {
            self.meta.observe(Transition {
                state: epoch.start_state.to_array().to_vec(),
                action: epoch.goal.index(),
                reward: extrinsic,
                next_state: state.to_array().to_vec(),
                done: terminal,
            })?;
        }
        let closed = EpochRecord {
            epoch_id: epoch.id,
            ue_id: obs.ue_id,
            goal: epoch.goal,
            start_tti: epoch.start_tti,
            end_tti: obs.tti,
            intrinsics: epoch.intrinsics,
            extrinsic,
            end,
        };
        self.log.epochs.push(closed.clone());
        Ok((Some(record), Some(closed)))
    }

    /// One controller decision for the flow in `obs`: settle the previous
    /// step, start a goal epoch if none is active, then pick a RAT.
    pub fn step(&mut self, obs: &Observation) -> Result<StepOutcome, SteeringError> {
        let state = encode_meta_state(obs);
        let (completed, closed_epoch) = self.complete_pending(obs, &state, false)?;

        let mut new_goal = false;
        if self.slot(obs.ue_id).epoch.is_none() {
            let goal = self.select_goal(&state)?;
            let id = self.next_epoch_id;
            self.next_epoch_id += 1;
            self.log.meta_decisions += 1;
            self.slot(obs.ue_id).epoch = Some(GoalEpoch {
                id,
                goal,
                start_state: state,
                start_tti: obs.tti,
                intrinsics: Vec::new(),
            });
            new_goal = true;
        }
        let goal = self
            .slot(obs.ue_id)
            .epoch
            .as_ref()
            .map(|e| e.goal)
            .expect("epoch just ensured");

        let input = encode_controller_input(&state, goal);
        let action_idx = self.controller.act(&input, self.training)?;
        let action = Rat::from_index(action_idx).expect("controller has two actions");
        self.log.controller_decisions += 1;
        self.slot(obs.ue_id).pending = Some(PendingStep {
            input,
            action,
            tti: obs.tti,
        });

        Ok(StepOutcome {
            action,
            goal,
            new_goal,
            completed,
            closed_epoch,
        })
    }

    /// Settles every flow's outstanding step and epoch at episode end.
    pub fn finish(&mut self, final_obs: &[Observation]) -> Result<(), SteeringError> {
        for obs in final_obs {
            let state = encode_meta_state(obs);
            self.complete_pending(obs, &state, true)?;
        }
        Ok(())
    }
}

impl SteeringPolicy for HdqnAgent {
    fn name(&self) -> &'static str {
        "hdqn"
    }

    fn begin_episode(&mut self, n_ues: usize, training: bool) {
        self.training = training;
        self.slots = vec![FlowSlot::default(); n_ues];
        self.log = HdqnLog::default();
    }

    fn decide(&mut self, obs: &Observation) -> Result<Decision, SteeringError> {
        let out = self.step(obs)?;
        Ok(Decision {
            rat: out.action,
            goal: Some(out.goal.threshold()),
            reward: out.completed.map(|c| c.intrinsic),
        })
    }

    fn end_episode(&mut self, final_obs: &[Observation]) -> Result<(), SteeringError> {
        self.finish(final_obs)
    }
}
