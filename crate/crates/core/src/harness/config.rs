//! Experiment configuration, read from TOML.
//!
//! Every section and key is optional; missing values take the desk-scale
//! defaults below. Unknown keys are rejected.
//!
//! ```toml
//! [topology]
//! n_small_cells = 4
//! n_ues = 60
//! macro_radius_m = 1000.0
//! min_inter_site_m = 50.0
//!
//! [traffic]
//! voice = 0.3
//! video = 0.4
//! gaming = 0.3
//!
//! [episode]
//! tti_ms = 1.0
//! episode_ttis = 10000
//! queue_capacity_bytes = 2000000
//! decision_interval_ttis = 50
//!
//! [experiment]
//! agent = "hdqn"
//! master_seed = 1
//! n_train_episodes = 20
//! n_eval_episodes = 5
//! output_dir = "out"
//!
//! [dqn]              # flat DQN baseline
//! hidden_layers = [64, 64]
//! gamma = 0.95
//!
//! [hdqn]
//! max_epoch_steps = 20
//! [hdqn.meta]        # same keys as [dqn]
//! [hdqn.controller]
//! [hdqn.reward]
//! throughput = 1.0
//! delay = 1.0
//! goal_miss_penalty = 0.5
//!
//! [heuristic]
//! load = 0.3333333333333333
//! channel = 0.3333333333333333
//! service = 0.3333333333333333
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::HeuristicWeights;
use crate::env::DEFAULT_DECISION_INTERVAL_TTIS;
use crate::error::{ConfigError, Error};
use crate::hdqn::HdqnConfig;
use crate::queue::DEFAULT_QUEUE_CAPACITY_BYTES;
use crate::radio::TopologyParams;
use crate::rl::DqnConfig;
use crate::traffic::{TrafficMix, TTI_MS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Hdqn,
    Dqn,
    Heuristic,
}

impl AgentKind {
    /// Table order.
    pub const ALL: [AgentKind; 3] = [AgentKind::Hdqn, AgentKind::Dqn, AgentKind::Heuristic];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::Hdqn => "hdqn",
            AgentKind::Dqn => "dqn",
            AgentKind::Heuristic => "heuristic",
        }
    }

    pub fn is_learned(self) -> bool {
        self != AgentKind::Heuristic
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "hdqn" | "h-dqn" => Ok(AgentKind::Hdqn),
            "dqn" => Ok(AgentKind::Dqn),
            "heuristic" => Ok(AgentKind::Heuristic),
            _ => Err(ConfigError::invalid(
                "agent",
                format!("unknown agent `{s}` (hdqn, dqn, heuristic)"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    /// Only 1 ms is supported; kept explicit so configs are self-describing.
    pub tti_ms: f64,
    pub episode_ttis: u64,
    pub queue_capacity_bytes: u64,
    pub decision_interval_ttis: u64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            tti_ms: TTI_MS,
            episode_ttis: 10_000,
            queue_capacity_bytes: DEFAULT_QUEUE_CAPACITY_BYTES,
            decision_interval_ttis: DEFAULT_DECISION_INTERVAL_TTIS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub agent: AgentKind,
    pub master_seed: u64,
    pub n_train_episodes: usize,
    pub n_eval_episodes: usize,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            agent: AgentKind::Hdqn,
            master_seed: 1,
            n_train_episodes: 20,
            n_eval_episodes: 5,
            output_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub topology: TopologyParams,
    pub traffic: TrafficMix,
    pub episode: EpisodeConfig,
    pub experiment: RunConfig,
    pub dqn: DqnConfig,
    pub hdqn: HdqnConfig,
    pub heuristic: HeuristicWeights,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.topology.validate()?;
        self.traffic.validate()?;
        if self.episode.tti_ms != TTI_MS {
            return Err(ConfigError::invalid(
                "episode.tti_ms",
                "only 1 ms TTIs are supported",
            ));
        }
        let counts = [
            ("episode.episode_ttis", self.episode.episode_ttis),
            (
                "episode.queue_capacity_bytes",
                self.episode.queue_capacity_bytes,
            ),
            (
                "episode.decision_interval_ttis",
                self.episode.decision_interval_ttis,
            ),
            (
                "experiment.n_train_episodes",
                self.experiment.n_train_episodes as u64,
            ),
            (
                "experiment.n_eval_episodes",
                self.experiment.n_eval_episodes as u64,
            ),
        ];
        for (key, v) in counts {
            if v == 0 {
                return Err(ConfigError::invalid(key, "must be at least 1"));
            }
        }
        self.dqn.validate("dqn")?;
        self.hdqn.validate()?;
        self.heuristic.validate()
    }

    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self::from_toml_str(&text, path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_desk_scale() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        assert_eq!(c.topology.n_ues, 60);
        assert_eq!(c.topology.n_small_cells, 4);
        assert_eq!(c.experiment.n_train_episodes, 20);
        assert_eq!(c.episode.episode_ttis, 10_000);
        assert_eq!(c.experiment.n_eval_episodes, 5);
    }

    #[test]
    fn empty_file_is_default() {
        let c = ExperimentConfig::from_toml_str("", Path::new("x.toml")).unwrap();
        assert_eq!(c, ExperimentConfig::default());
    }

    #[test]
    fn overrides_and_round_trip() {
        let text =
            "[topology]\nn_ues = 12\n[experiment]\nagent = \"dqn\"\n[hdqn.meta]\ngamma = 0.5\n";
        let c = ExperimentConfig::from_toml_str(text, Path::new("x.toml")).unwrap();
        assert_eq!(c.topology.n_ues, 12);
        assert_eq!(c.experiment.agent, AgentKind::Dqn);
        assert_eq!(c.hdqn.meta.gamma, 0.5);
        assert_eq!(c.hdqn.controller.gamma, 0.95);
        let back =
            ExperimentConfig::from_toml_str(&c.to_toml_string(), Path::new("y.toml")).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_bad_values() {
        let bad = [
            "[traffic]\nvoice = 0.5\nvideo = 0.5\ngaming = 0.5\n",
            "[episode]\nepisode_ttis = 0\n",
            "[episode]\ntti_ms = 0.5\n",
            "[experiment]\nn_eval_episodes = 0\n",
            "[experiment]\nagent = \"random\"\n",
            "[episode]\nbogus = 1\n",
            "[heuristic]\nload = 0.9\n",
        ];
        for text in bad {
            assert!(
                ExperimentConfig::from_toml_str(text, Path::new("x.toml")).is_err(),
                "{text}"
            );
        }
    }
}
