//! Configuration, seeding, episode and experiment orchestration, CSV and SVG
//! output.

pub mod config;
pub mod csv;
pub mod episode;
pub mod experiment;
pub mod plot;
pub mod scenario;
pub mod seed;

use std::path::{Path, PathBuf};

use crate::baselines::FlatDqnAgent;
use crate::error::{Error, Result};
use crate::hdqn::HdqnAgent;
use crate::rl::{read_checkpoint, write_checkpoint};

pub use config::{AgentKind, ExperimentConfig};
pub use episode::{
    run_episode, traffic_trace, AgentBundle, EpisodeLog, EpisodeOptions, SteeringEvent,
};
pub use experiment::{evaluate, run_experiment, train_agent, ComparisonTable, ExperimentResult};
pub use scenario::Scenario;
pub use seed::derive_stream_seed;

fn checkpoint_files(kind: AgentKind, dir: &Path) -> Vec<PathBuf> {
    match kind {
        AgentKind::Hdqn => vec![dir.join("hdqn_meta.ckpt"), dir.join("hdqn_controller.ckpt")],
        AgentKind::Dqn => vec![dir.join("dqn.ckpt")],
        AgentKind::Heuristic => vec![],
    }
}

/// Writes the agent's networks into `dir`; returns the files written.
pub fn save_agent(agent: &AgentBundle, dir: &Path) -> Result<Vec<PathBuf>> {
    let texts = match agent {
        AgentBundle::Hdqn(a) => vec![write_checkpoint(a.meta()), write_checkpoint(a.controller())],
        AgentBundle::Dqn(a) => vec![write_checkpoint(a.agent())],
        AgentBundle::Heuristic(_) => vec![],
    };
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let files = checkpoint_files(agent.kind(), dir);
    for (path, text) in files.iter().zip(texts) {
        std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
    }
    Ok(files)
}

/// Restores an agent saved by [`save_agent`]. The heuristic needs no files.
pub fn load_agent(kind: AgentKind, config: &ExperimentConfig, dir: &Path) -> Result<AgentBundle> {
    let master = config.experiment.master_seed;
    let mut agents = Vec::new();
    for (i, path) in checkpoint_files(kind, dir).iter().enumerate() {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        agents.push(read_checkpoint(
            &text,
            derive_stream_seed(master, &format!("agent/load/{i}")),
        )?);
    }
    let mut agents = agents.into_iter();
    Ok(match kind {
        AgentKind::Hdqn => {
            let meta = agents.next().expect("two files");
            let ctrl = agents.next().expect("two files");
            check_shape(
                &meta,
                crate::hdqn::META_STATE_DIM,
                crate::hdqn::GOAL_THRESHOLDS.len(),
                "meta",
            )?;
            check_shape(&ctrl, crate::hdqn::CONTROLLER_INPUT_DIM, 2, "controller")?;
            AgentBundle::Hdqn(HdqnAgent::from_agents(config.hdqn.clone(), meta, ctrl))
        }
        AgentKind::Dqn => {
            let a = agents.next().expect("one file");
            check_shape(&a, crate::hdqn::META_STATE_DIM, 2, "dqn")?;
            AgentBundle::Dqn(FlatDqnAgent::from_agent(a, config.hdqn.reward))
        }
        AgentKind::Heuristic => AgentBundle::new(kind, config),
    })
}

fn check_shape(a: &crate::rl::DqnAgent, n_in: usize, n_out: usize, what: &str) -> Result<()> {
    if a.n_inputs() != n_in || a.n_actions() != n_out {
        return Err(Error::Usage(format!(
            "{what} checkpoint has shape {}x{}, expected {n_in}x{n_out}",
            a.n_inputs(),
            a.n_actions()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn save_load_round_trip() {
        let c = ExperimentConfig::default();
        let dir = tempfile::tempdir().unwrap();
        for kind in AgentKind::ALL {
            let a = AgentBundle::new(kind, &c);
            let files = save_agent(&a, dir.path()).unwrap();
            let b = load_agent(kind, &c, dir.path()).unwrap();
            match (&a, &b) {
                (AgentBundle::Hdqn(x), AgentBundle::Hdqn(y)) => {
                    assert_eq!(files.len(), 2);
                    assert_eq!(x.meta().online(), y.meta().online());
                    assert_eq!(x.controller().online(), y.controller().online());
                }
                (AgentBundle::Dqn(x), AgentBundle::Dqn(y)) => {
                    assert_eq!(x.agent().online(), y.agent().online())
                }
                (AgentBundle::Heuristic(_), AgentBundle::Heuristic(_)) => assert!(files.is_empty()),
                _ => panic!("kind changed"),
            }
        }
    }

    #[test]
    fn wrong_shape_is_rejected() {
        let c = ExperimentConfig::default();
        let dir = tempfile::tempdir().unwrap();
        let a = AgentBundle::new(AgentKind::Hdqn, &c);
        save_agent(&a, dir.path()).unwrap();
        std::fs::copy(
            dir.path().join("hdqn_controller.ckpt"),
            dir.path().join("dqn.ckpt"),
        )
        .unwrap();
        assert!(load_agent(AgentKind::Dqn, &c, dir.path()).is_err());
    }
}
