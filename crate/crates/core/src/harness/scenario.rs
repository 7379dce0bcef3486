//! Scenario files: timed UE arrivals on top of the random topology.
//!
//! One event per line, `#` starts a comment:
//!
//! ```text
//! at 0    add_ue type=video near=1 count=6
//! at 2100 add_ue type=video near=1
//! at 3000 add_ue type=gaming x=120.5 y=-40
//! ```
//!
//! `near=<bs>` places the UE `offset` metres (default 20) east of small cell
//! `<bs>`; `x=`/`y=` give an absolute position. `count` repeats the arrival.

use std::path::Path;

use crate::error::{ConfigError, Error};
use crate::radio::{Position, Rat, Topology};
use crate::traffic::TrafficType;

pub const DEFAULT_NEAR_OFFSET_M: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Placement {
    Near { bs_id: usize, offset_m: f64 },
    At(Position),
}

#[derive(Debug, Clone, PartialEq)]
pub struct UeArrival {
    pub tti: u64,
    pub traffic_type: TrafficType,
    pub placement: Placement,
    pub count: usize,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scenario {
    pub arrivals: Vec<UeArrival>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut arrivals = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            arrivals.push(parse_line(content, line)?);
        }
        Ok(Self { arrivals })
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self::parse(&text)?)
    }

    /// Appends the scheduled UEs to `topology`, in file order. Returns the
    /// ids of the new UEs.
    pub fn apply(&self, topology: &mut Topology) -> Result<Vec<usize>, ConfigError> {
        let mut added = Vec::new();
        for a in &self.arrivals {
            let position = match a.placement {
                Placement::At(p) => p,
                Placement::Near { bs_id, offset_m } => {
                    let bs = topology
                        .base_stations
                        .get(bs_id)
                        .filter(|bs| bs.rat == Rat::Nr)
                        .ok_or_else(|| ConfigError::Scenario {
                            line: a.line,
                            message: format!("`near={bs_id}` is not a small cell"),
                        })?;
                    Position::new(bs.position.x + offset_m, bs.position.y)
                }
            };
            for _ in 0..a.count {
                added.push(topology.push_ue(position, a.traffic_type, a.tti));
            }
        }
        Ok(added)
    }
}

fn parse_line(content: &str, line: usize) -> Result<UeArrival, ConfigError> {
    let err = |message: String| ConfigError::Scenario { line, message };
    let mut words = content.split_whitespace();
    if words.next() != Some("at") {
        return Err(err("expected `at <tti> add_ue ...`".into()));
    }
    let tti: u64 = words
        .next()
        .and_then(|w| w.parse().ok())
        .ok_or_else(|| err("missing or invalid TTI".into()))?;
    match words.next() {
        Some("add_ue") => {}
        Some(other) => return Err(err(format!("unknown action `{other}`"))),
        None => return Err(err("missing action".into())),
    }

    let mut traffic_type = None;
    let (mut near, mut offset, mut x, mut y) = (None, DEFAULT_NEAR_OFFSET_M, None, None);
    let mut count = 1usize;
    for kv in words {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| err(format!("expected key=value, got `{kv}`")))?;
        let num = |v: &str| {
            v.parse::<f64>()
                .ok()
                .filter(|f| f.is_finite())
                .ok_or_else(|| err(format!("bad number in `{kv}`")))
        };
        match k {
            "type" => {
                traffic_type = Some(
                    v.parse::<TrafficType>()
                        .map_err(|_| err(format!("unknown traffic type `{v}`")))?,
                )
            }
            "near" => {
                near = Some(
                    v.parse::<usize>()
                        .map_err(|_| err(format!("bad base station id `{v}`")))?,
                )
            }
            "offset" => offset = num(v)?,
            "x" => x = Some(num(v)?),
            "y" => y = Some(num(v)?),
            "count" => {
                count = v
                    .parse()
                    .ok()
                    .filter(|&c| c >= 1)
                    .ok_or_else(|| err(format!("bad count `{v}`")))?;
            }
            _ => return Err(err(format!("unknown key `{k}`"))),
        }
    }
    let traffic_type = traffic_type.ok_or_else(|| err("missing `type=`".into()))?;
    let placement = match (near, x, y) {
        (Some(bs_id), None, None) => Placement::Near {
            bs_id,
            offset_m: offset,
        },
        (None, Some(x), Some(y)) => Placement::At(Position::new(x, y)),
        _ => return Err(err("give either `near=` or both `x=` and `y=`".into())),
    };
    Ok(UeArrival {
        tti,
        traffic_type,
        placement,
        count,
        line,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radio::{build_topology, TopologyParams};
    use crate::traffic::TrafficMix;

    #[test]
    fn parses_events() {
        let s = Scenario::parse("# load\nat 0 add_ue type=video near=1 count=3\n\nat 2100 add_ue type=gaming x=1 y=-2.5 # late\n")
            .unwrap();
        assert_eq!(s.arrivals.len(), 2);
        assert_eq!(s.arrivals[0].count, 3);
        assert_eq!(
            s.arrivals[0].placement,
            Placement::Near {
                bs_id: 1,
                offset_m: 20.0
            }
        );
        assert_eq!(s.arrivals[1].tti, 2100);
        assert_eq!(
            s.arrivals[1].placement,
            Placement::At(Position::new(1.0, -2.5))
        );
    }

    #[test]
    fn reports_line_numbers() {
        let e = Scenario::parse("at 1 add_ue type=video near=1\nat x add_ue type=video near=1\n")
            .unwrap_err();
        assert!(matches!(e, ConfigError::Scenario { line: 2, .. }));
        for bad in [
            "add_ue",
            "at 5 remove_ue",
            "at 5 add_ue near=1",
            "at 5 add_ue type=fax near=1",
            "at 5 add_ue type=video x=1",
        ] {
            assert!(Scenario::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn apply_appends_late_arrivals() {
        let params = TopologyParams {
            n_small_cells: 2,
            n_ues: 5,
            ..Default::default()
        };
        let mut topo = build_topology(&params, &TrafficMix::default(), 1).unwrap();
        let s = Scenario::parse("at 2100 add_ue type=video near=1 count=2").unwrap();
        let ids = s.apply(&mut topo).unwrap();
        assert_eq!(ids, vec![5, 6]);
        assert_eq!(topo.ues[6].arrival_tti, 2100);
        assert_eq!(topo.ues[6].serving.nr, 1);
        assert!(Scenario::parse("at 1 add_ue type=video near=0")
            .unwrap()
            .apply(&mut topo)
            .is_err());
    }
}
