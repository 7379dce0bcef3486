//! Multi-RAT (LTE + 5G NR) downlink simulator with learned traffic steering.
//!
//! A meta-controller (the rApp role on the non-RT RIC) chooses queue-occupancy
//! thresholds on a coarse timescale; a controller (the xApp role on the
//! near-RT RIC) admits each flow to LTE or NR under the active threshold.
//! A threshold heuristic and a single-level DQN serve as baselines.

pub mod baselines;
pub mod env;
pub mod error;
pub mod harness;
pub mod hdqn;
pub mod queue;
pub mod radio;
pub mod rl;
pub mod traffic;

pub use error::{Error, Result};
