//! Value-learning machinery shared by the flat and hierarchical agents.

pub mod agent;
pub mod checkpoint;
pub mod mlp;
pub mod replay;

pub use agent::{argmax, DqnAgent, DqnConfig, Learner};
pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use mlp::{Dense, Gradients, Mlp};
pub use replay::{ReplayBuffer, Transition};
