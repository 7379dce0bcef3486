//! Training and multi-seed evaluation of the three schemes.

use rayon::prelude::*;

use crate::error::Result;
use crate::queue::MetricsWindow;

use super::config::{AgentKind, ExperimentConfig};
use super::episode::{run_episode, AgentBundle, EpisodeOptions};
use super::scenario::Scenario;
use super::seed::{eval_episode_seed, train_episode_seed};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSummary {
    pub index: usize,
    pub episode_seed: u64,
    pub metrics: MetricsWindow,
    pub trace_hash: u64,
    pub mean_reward: f64,
}

/// Trains a fresh agent on `n_train_episodes` seeded episodes. The heuristic
/// comes back unchanged with an empty history.
pub fn train_agent(
    config: &ExperimentConfig,
    kind: AgentKind,
) -> Result<(AgentBundle, Vec<EpisodeSummary>)> {
    let mut agent = AgentBundle::new(kind, config);
    if !kind.is_learned() {
        return Ok((agent, Vec::new()));
    }
    train_more(config, &mut agent, 0..config.experiment.n_train_episodes).map(|h| (agent, h))
}

pub fn train_more(
    config: &ExperimentConfig,
    agent: &mut AgentBundle,
    episodes: std::ops::Range<usize>,
) -> Result<Vec<EpisodeSummary>> {
    let mut history = Vec::new();
    let options = EpisodeOptions {
        training: true,
        record_queues: false,
    };
    for i in episodes {
        let seed = train_episode_seed(config.experiment.master_seed, i);
        let log = run_episode(config, agent, seed, None, options)?;
        history.push(summarize(i, &log));
    }
    Ok(history)
}

fn summarize(index: usize, log: &super::episode::EpisodeLog) -> EpisodeSummary {
    let mean_reward = if log.rewards.is_empty() {
        0.0
    } else {
        log.rewards.iter().sum::<f64>() / log.rewards.len() as f64
    };
    EpisodeSummary {
        index,
        episode_seed: log.episode_seed,
        metrics: log.metrics,
        trace_hash: log.trace_hash,
        mean_reward,
    }
}

/// Greedy evaluation on the shared evaluation seeds. Every seed runs on its
/// own copy of the agent; results come back in seed order.
pub fn evaluate(
    config: &ExperimentConfig,
    agent: &AgentBundle,
    scenario: Option<&Scenario>,
) -> Result<Vec<EpisodeSummary>> {
    let master = config.experiment.master_seed;
    (0..config.experiment.n_eval_episodes)
        .into_par_iter()
        .map(|j| {
            let mut local = agent.clone();
            let options = EpisodeOptions {
                training: false,
                record_queues: false,
            };
            let log = run_episode(
                config,
                &mut local,
                eval_episode_seed(master, j),
                scenario,
                options,
            )?;
            Ok(summarize(j, &log))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Stats {
    pub mean: f64,
    /// Population standard deviation across seeds.
    pub std: f64,
    pub median: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Stats {
        if values.is_empty() {
            return Stats::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let m = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 {
            sorted[m]
        } else {
            0.5 * (sorted[m - 1] + sorted[m])
        };
        Stats {
            mean,
            std: var.sqrt(),
            median,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentRow {
    pub agent: AgentKind,
    pub per_seed: Vec<EpisodeSummary>,
    pub throughput_bps: Stats,
    pub delay_ms: Stats,
    pub drop_ratio: Stats,
}

impl AgentRow {
    pub fn new(agent: AgentKind, per_seed: Vec<EpisodeSummary>) -> Self {
        let col = |f: fn(&MetricsWindow) -> f64| {
            per_seed.iter().map(|s| f(&s.metrics)).collect::<Vec<_>>()
        };
        Self {
            agent,
            throughput_bps: Stats::of(&col(|m| m.avg_throughput_bps)),
            delay_ms: Stats::of(&col(|m| m.avg_delay_ms)),
            drop_ratio: Stats::of(&col(|m| m.drop_ratio)),
            per_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComparisonTable {
    pub rows: Vec<AgentRow>,
}

impl ComparisonTable {
    pub fn row(&self, agent: AgentKind) -> Option<&AgentRow> {
        self.rows.iter().find(|r| r.agent == agent)
    }

    /// `(hdqn - x) / x` on mean throughput and mean delay, for row `x`.
    pub fn hdqn_gain(&self, agent: AgentKind) -> Option<(f64, f64)> {
        let h = self.row(AgentKind::Hdqn)?;
        let x = self.row(agent)?;
        let rel = |a: f64, b: f64| if b == 0.0 { f64::NAN } else { (a - b) / b };
        Some((
            rel(h.throughput_bps.mean, x.throughput_bps.mean),
            rel(h.delay_ms.mean, x.delay_ms.mean),
        ))
    }

    /// All rows saw identical traffic on every seed.
    pub fn traces_match(&self) -> bool {
        let mut rows = self.rows.iter();
        let Some(first) = rows.next() else {
            return true;
        };
        rows.all(|r| {
            r.per_seed.len() == first.per_seed.len()
                && r.per_seed
                    .iter()
                    .zip(&first.per_seed)
                    .all(|(a, b)| a.trace_hash == b.trace_hash)
        })
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub table: ComparisonTable,
    pub agents: Vec<AgentBundle>,
    pub training: Vec<(AgentKind, Vec<EpisodeSummary>)>,
}

/// Trains each learned scheme, then evaluates every scheme in `agents` on the
/// same evaluation seeds. Rows follow `agents` order.
pub fn run_experiment(config: &ExperimentConfig, agents: &[AgentKind]) -> Result<ExperimentResult> {
    config.validate()?;
    let trained: Vec<(AgentBundle, Vec<EpisodeSummary>)> = agents
        .par_iter()
        .map(|&k| train_agent(config, k))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (agent, _) in &trained {
        rows.push(AgentRow::new(agent.kind(), evaluate(config, agent, None)?));
    }
    let training = trained.iter().map(|(a, h)| (a.kind(), h.clone())).collect();
    Ok(ExperimentResult {
        table: ComparisonTable { rows },
        agents: trained.into_iter().map(|(a, _)| a).collect(),
        training,
    })
}
