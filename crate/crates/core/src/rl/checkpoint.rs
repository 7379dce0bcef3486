//! Plain-text agent checkpoints.
//!
//! ```text
//! ratsteer-checkpoint 1
//! layers <n_in> <h1> ... <n_out>
//! gamma <f64>
//! epsilon_start <f64>
//! epsilon_end <f64>
//! epsilon_decay_steps <u64>
//! learning_rate <f64>
//! replay_capacity <usize>
//! batch_size <usize>
//! target_sync_steps <u64>
//! grad_clip_norm <f64>
//! layer <index>
//! w <n_in values>        (one line per output unit, row-major)
//! b <n_out values>
//! ...                     (one `layer` block per weight layer)
//! end
//! ```
//!
//! Numbers use Rust's shortest round-trip formatting, so a save/load cycle
//! reproduces every parameter bit for bit. Lines starting with `#` are
//! comments.

use std::fmt::Write as _;
use std::str::FromStr;

use super::agent::{DqnAgent, DqnConfig};
use super::mlp::{Dense, Mlp};
use crate::error::RlError;

const MAGIC: &str = "ratsteer-checkpoint";
const VERSION: u32 = 1;

pub fn write_checkpoint(agent: &DqnAgent) -> String {
    let c = agent.config();
    let net = agent.online();
    let mut out = String::new();
    let join = |v: &[f64]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let _ = writeln!(out, "{MAGIC} {VERSION}");
    let sizes: Vec<String> = net.layer_sizes().iter().map(|s| s.to_string()).collect();
    let _ = writeln!(out, "layers {}", sizes.join(" "));
    let _ = writeln!(out, "gamma {}", c.gamma);
    let _ = writeln!(out, "epsilon_start {}", c.epsilon_start);
    let _ = writeln!(out, "epsilon_end {}", c.epsilon_end);
    let _ = writeln!(out, "epsilon_decay_steps {}", c.epsilon_decay_steps);
    let _ = writeln!(out, "learning_rate {}", c.learning_rate);
    let _ = writeln!(out, "replay_capacity {}", c.replay_capacity);
    let _ = writeln!(out, "batch_size {}", c.batch_size);
    let _ = writeln!(out, "target_sync_steps {}", c.target_sync_steps);
    let _ = writeln!(out, "grad_clip_norm {}", c.grad_clip_norm);
    for (i, layer) in net.layers().iter().enumerate() {
        let _ = writeln!(out, "layer {i}");
        for row in layer.weights.chunks_exact(layer.n_in) {
            let _ = writeln!(out, "w {}", join(row));
        }
        let _ = writeln!(out, "b {}", join(&layer.bias));
    }
    out.push_str("end\n");
    out
}

/// Parses a checkpoint into an evaluation-ready agent (target = online).
pub fn read_checkpoint(text: &str, seed: u64) -> Result<DqnAgent, RlError> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let bad = |m: String| RlError::Checkpoint(m);

    let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
    match header.split_whitespace().collect::<Vec<_>>().as_slice() {
        [MAGIC, v] if *v == VERSION.to_string() => {}
        _ => return Err(bad(format!("unrecognized header `{header}`"))),
    }

    let mut field = |name: &str| -> Result<Vec<String>, RlError> {
        let line = lines
            .next()
            .ok_or_else(|| bad(format!("missing `{name}`")))?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(name) {
            return Err(bad(format!("expected `{name}`, found `{line}`")));
        }
        Ok(parts.map(str::to_owned).collect())
    };
    fn parse<T: FromStr>(s: &str) -> Result<T, RlError> {
        s.parse()
            .map_err(|_| RlError::Checkpoint(format!("bad number `{s}`")))
    }
    fn scalar<T: FromStr>(v: Vec<String>) -> Result<T, RlError> {
        match v.as_slice() {
            [x] => parse(x),
            _ => Err(RlError::Checkpoint("expected a single value".into())),
        }
    }

    let sizes: Vec<usize> = field("layers")?
        .iter()
        .map(|s| parse(s))
        .collect::<Result<_, _>>()?;
    if sizes.len() < 2 {
        return Err(bad("need at least two layer sizes".into()));
    }
    let config = DqnConfig {
        hidden_layers: sizes[1..sizes.len() - 1].to_vec(),
        gamma: scalar(field("gamma")?)?,
        epsilon_start: scalar(field("epsilon_start")?)?,
        epsilon_end: scalar(field("epsilon_end")?)?,
        epsilon_decay_steps: scalar(field("epsilon_decay_steps")?)?,
        learning_rate: scalar(field("learning_rate")?)?,
        replay_capacity: scalar(field("replay_capacity")?)?,
        batch_size: scalar(field("batch_size")?)?,
        target_sync_steps: scalar(field("target_sync_steps")?)?,
        grad_clip_norm: scalar(field("grad_clip_norm")?)?,
    };

    let mut layers = Vec::new();
    for (i, pair) in sizes.windows(2).enumerate() {
        let (n_in, n_out) = (pair[0], pair[1]);
        let idx: usize = scalar(field("layer")?)?;
        if idx != i {
            return Err(bad(format!("expected layer {i}, found {idx}")));
        }
        let mut layer = Dense::zeros(n_in, n_out);
        for o in 0..n_out {
            let row: Vec<f64> = field("w")?
                .iter()
                .map(|s| parse(s))
                .collect::<Result<_, _>>()?;
            if row.len() != n_in {
                return Err(bad(format!(
                    "layer {i} row {o}: expected {n_in} weights, got {}",
                    row.len()
                )));
            }
            layer.weights[o * n_in..(o + 1) * n_in].copy_from_slice(&row);
        }
        let bias: Vec<f64> = field("b")?
            .iter()
            .map(|s| parse(s))
            .collect::<Result<_, _>>()?;
        if bias.len() != n_out {
            return Err(bad(format!(
                "layer {i}: expected {n_out} biases, got {}",
                bias.len()
            )));
        }
        layer.bias = bias;
        layers.push(layer);
    }
    if lines.next() != Some("end") {
        return Err(bad("missing `end`".into()));
    }
    let net = Mlp::from_layers(layers)?;
    if !net.is_finite() {
        return Err(bad("non-finite parameter".into()));
    }
    Ok(DqnAgent::from_network(net, config, seed))
}
