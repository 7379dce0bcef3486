//! A single episode: build the network from an episode seed, advance it TTI
//! by TTI and route every due decision through the agent.

use crate::baselines::{build_flat_dqn, FlatDqnAgent, HeuristicPolicy};
use crate::env::{Network, QueueSnapshot, SteeringPolicy};
use crate::error::Result;
use crate::hdqn::{HdqnAgent, HdqnLog};
use crate::queue::MetricsWindow;
use crate::radio::{build_topology, Rat, Topology};
use crate::traffic::{FlowGenerator, Packet, TrafficType};

use super::config::{AgentKind, ExperimentConfig};
use super::scenario::Scenario;
use super::seed::{derive_stream_seed, topology_seed, traffic_seed};

/// One of the three steering schemes, with whatever it has learned.
#[derive(Debug, Clone)]
pub enum AgentBundle {
    Hdqn(HdqnAgent),
    Dqn(FlatDqnAgent),
    Heuristic(HeuristicPolicy),
}

impl AgentBundle {
    /// Fresh, untrained agent seeded from the master seed.
    pub fn new(kind: AgentKind, config: &ExperimentConfig) -> Self {
        let master = config.experiment.master_seed;
        match kind {
            AgentKind::Hdqn => AgentBundle::Hdqn(HdqnAgent::new(
                config.hdqn.clone(),
                derive_stream_seed(master, "agent/meta"),
                derive_stream_seed(master, "agent/ctrl"),
            )),
            AgentKind::Dqn => AgentBundle::Dqn(build_flat_dqn(
                config.dqn.clone(),
                config.hdqn.reward,
                derive_stream_seed(master, "agent/dqn"),
            )),
            AgentKind::Heuristic => AgentBundle::Heuristic(HeuristicPolicy::new(config.heuristic)),
        }
    }

    pub fn kind(&self) -> AgentKind {
        match self {
            AgentBundle::Hdqn(_) => AgentKind::Hdqn,
            AgentBundle::Dqn(_) => AgentKind::Dqn,
            AgentBundle::Heuristic(_) => AgentKind::Heuristic,
        }
    }

    pub fn policy_mut(&mut self) -> &mut dyn SteeringPolicy {
        match self {
            AgentBundle::Hdqn(a) => a,
            AgentBundle::Dqn(a) => a,
            AgentBundle::Heuristic(a) => a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteeringEvent {
    pub tti: u64,
    pub ue_id: usize,
    pub traffic_type: TrafficType,
    pub previous: Option<Rat>,
    pub chosen: Rat,
    pub active_goal: Option<f64>,
    /// Serving LTE and NR queue occupancy seen by the decision.
    pub occupancy: [f64; 2],
    /// Reward credited to the UE's previous step.
    pub reward: Option<f64>,
}

impl SteeringEvent {
    /// The flow moved from one RAT to the other.
    pub fn is_switch(&self) -> bool {
        self.previous.is_some_and(|p| p != self.chosen)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TtiRecord {
    pub tti: u64,
    pub queues: Vec<QueueSnapshot>,
}

#[derive(Debug, Clone)]
pub struct EpisodeLog {
    pub agent: AgentKind,
    pub episode_seed: u64,
    pub training: bool,
    pub episode_ttis: u64,
    pub n_ues: usize,
    pub ue_types: Vec<TrafficType>,
    /// Serving (LTE, NR) base station of every UE.
    pub ue_serving: Vec<(usize, usize)>,
    pub records: Vec<TtiRecord>,
    /// Every decision, in the order taken.
    pub decisions: Vec<SteeringEvent>,
    pub rewards: Vec<f64>,
    pub hdqn: Option<HdqnLog>,
    pub metrics: MetricsWindow,
    pub metrics_by_type: [MetricsWindow; 3],
    pub trace_hash: u64,
}

impl EpisodeLog {
    pub fn switches(&self) -> impl Iterator<Item = &SteeringEvent> {
        self.decisions.iter().filter(|e| e.is_switch())
    }

    pub fn is_conserved(&self) -> bool {
        self.records
            .iter()
            .all(|r| r.queues.iter().all(QueueSnapshot::is_conserved))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeOptions {
    pub training: bool,
    /// Keep per-TTI queue snapshots (the bulk of a log).
    pub record_queues: bool,
}

impl Default for EpisodeOptions {
    fn default() -> Self {
        Self {
            training: false,
            record_queues: true,
        }
    }
}

pub fn run_episode(
    config: &ExperimentConfig,
    agent: &mut AgentBundle,
    episode_seed: u64,
    scenario: Option<&Scenario>,
    options: EpisodeOptions,
) -> Result<EpisodeLog> {
    config.validate()?;
    let mut topology = build_topology(
        &config.topology,
        &config.traffic,
        topology_seed(episode_seed),
    )?;
    if let Some(s) = scenario {
        s.apply(&mut topology)?;
    }
    let n_ues = topology.ues.len();
    let ue_types = topology.ues.iter().map(|u| u.traffic_type).collect();
    let ue_serving = topology
        .ues
        .iter()
        .map(|u| (u.serving.lte, u.serving.nr))
        .collect();
    let mut net = Network::new(
        topology,
        config.episode.queue_capacity_bytes,
        config.episode.decision_interval_ttis,
        |ue| traffic_seed(episode_seed, ue),
    );

    let kind = agent.kind();
    let policy = agent.policy_mut();
    policy.begin_episode(n_ues, options.training);

    let ttis = config.episode.episode_ttis;
    let mut records = Vec::with_capacity(if options.record_queues {
        ttis as usize
    } else {
        0
    });
    let mut decisions = Vec::new();
    let mut rewards = Vec::new();
    for tti in 0..ttis {
        for ue in net.due_decisions(tti) {
            let obs = net.observe(ue, tti);
            let d = policy.decide(&obs)?;
            if let Some(r) = d.reward {
                rewards.push(r);
            }
            decisions.push(SteeringEvent {
                tti,
                ue_id: ue,
                traffic_type: obs.traffic_type,
                previous: obs.current,
                chosen: d.rat,
                active_goal: d.goal,
                occupancy: obs.occupancy,
                reward: d.reward,
            });
            net.assign(ue, d.rat, tti);
        }
        let reports = net.step(tti)?;
        if options.record_queues {
            records.push(TtiRecord {
                tti,
                queues: net.snapshots(&reports),
            });
        }
    }

    let final_obs: Vec<_> = (0..n_ues)
        .filter(|&u| net.assignment(u).is_some())
        .map(|u| net.observe(u, ttis))
        .collect();
    policy.end_episode(&final_obs)?;

    let hdqn = match agent {
        AgentBundle::Hdqn(a) => Some(a.take_log()),
        _ => None,
    };
    Ok(EpisodeLog {
        agent: kind,
        episode_seed,
        training: options.training,
        episode_ttis: ttis,
        n_ues,
        ue_types,
        ue_serving,
        records,
        decisions,
        rewards,
        hdqn,
        metrics: net.totals(),
        metrics_by_type: net.totals_by_type(),
        trace_hash: net.trace_hash(),
    })
}

/// Every packet the episode's generators emit, in (tti, flow) order. The
/// same packets [`run_episode`] feeds the queues, whatever the agent does.
pub fn traffic_trace(topology: &Topology, episode_seed: u64, ttis: u64) -> Result<Vec<Packet>> {
    let mut gens: Vec<FlowGenerator> = topology
        .ues
        .iter()
        .map(|u| {
            FlowGenerator::new(
                u.id,
                u.traffic_type,
                traffic_seed(episode_seed, u.id),
                u.arrival_tti,
            )
        })
        .collect();
    let mut out = Vec::new();
    for tti in 0..ttis {
        for (g, ue) in gens.iter_mut().zip(&topology.ues) {
            if ue.arrival_tti <= tti {
                out.extend(g.generate_tti(tti)?);
            }
        }
    }
    Ok(out)
}
