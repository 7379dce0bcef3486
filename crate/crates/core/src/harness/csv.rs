//! CSV export.
//!
//! Every file starts with one `# ratsteer <kind> v<version>` comment line,
//! then a header row. Floats carry 9 significant digits; missing values are
//! empty fields. Column orders:
//!
//! | kind       | columns |
//! |------------|---------|
//! | comparison | agent, throughput_bps_mean, throughput_bps_std, delay_ms_mean, delay_ms_std, drop_ratio_mean, drop_ratio_std, throughput_bps_median, delay_ms_median, n_seeds, hdqn_throughput_gain, hdqn_delay_gain |
//! | per-seed   | agent, seed_index, episode_seed, throughput_bps, delay_ms, drop_ratio, trace_hash |
//! | training   | agent, episode, episode_seed, throughput_bps, delay_ms, drop_ratio, mean_reward |
//! | queues     | tti, bs_id, occupancy, served_bits, dropped_bytes |
//! | steering   | tti, ue_id, traffic_type, chosen_rat, active_goal, occupancy_lte, occupancy_nr, intrinsic, previous_rat |
//! | topology   | node, id, rat, x, y, traffic_type, serving_nr_bs |
//! | traffic    | tti, flow_id, size_bytes |

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::radio::Topology;
use crate::traffic::Packet;

use super::config::AgentKind;
use super::episode::EpisodeLog;
use super::experiment::{ComparisonTable, EpisodeSummary};

pub const CSV_VERSION: u32 = 1;

pub const COMPARISON_COLUMNS: [&str; 12] = [
    "agent",
    "throughput_bps_mean",
    "throughput_bps_std",
    "delay_ms_mean",
    "delay_ms_std",
    "drop_ratio_mean",
    "drop_ratio_std",
    "throughput_bps_median",
    "delay_ms_median",
    "n_seeds",
    "hdqn_throughput_gain",
    "hdqn_delay_gain",
];
pub const PER_SEED_COLUMNS: [&str; 7] = [
    "agent",
    "seed_index",
    "episode_seed",
    "throughput_bps",
    "delay_ms",
    "drop_ratio",
    "trace_hash",
];
pub const TRAINING_COLUMNS: [&str; 7] = [
    "agent",
    "episode",
    "episode_seed",
    "throughput_bps",
    "delay_ms",
    "drop_ratio",
    "mean_reward",
];
pub const QUEUE_COLUMNS: [&str; 5] = ["tti", "bs_id", "occupancy", "served_bits", "dropped_bytes"];
pub const STEERING_COLUMNS: [&str; 9] = [
    "tti",
    "ue_id",
    "traffic_type",
    "chosen_rat",
    "active_goal",
    "occupancy_lte",
    "occupancy_nr",
    "intrinsic",
    "previous_rat",
];
pub const TOPOLOGY_COLUMNS: [&str; 7] = [
    "node",
    "id",
    "rat",
    "x",
    "y",
    "traffic_type",
    "serving_nr_bs",
];
pub const TRAFFIC_COLUMNS: [&str; 3] = ["tti", "flow_id", "size_bytes"];

/// 9 significant digits, shortest form.
pub fn fmt_float(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

fn opt_float(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

fn write_table<W: Write>(
    out: W,
    kind: &str,
    columns: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> std::io::Result<()> {
    let mut out = out;
    write!(out, "# ratsteer {kind} v{CSV_VERSION}\r\n")?;
    let mut w = ::csv::WriterBuilder::new()
        .terminator(::csv::Terminator::CRLF)
        .from_writer(out);
    w.write_record(columns)?;
    for row in rows {
        debug_assert_eq!(row.len(), columns.len());
        w.write_record(&row)?;
    }
    w.flush()
}

fn to_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, buf).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_comparison<W: Write>(table: &ComparisonTable, out: W) -> std::io::Result<()> {
    let rows = table.rows.iter().map(|r| {
        let gain = table.hdqn_gain(r.agent);
        vec![
            r.agent.to_string(),
            fmt_float(r.throughput_bps.mean),
            fmt_float(r.throughput_bps.std),
            fmt_float(r.delay_ms.mean),
            fmt_float(r.delay_ms.std),
            fmt_float(r.drop_ratio.mean),
            fmt_float(r.drop_ratio.std),
            fmt_float(r.throughput_bps.median),
            fmt_float(r.delay_ms.median),
            r.per_seed.len().to_string(),
            opt_float(gain.map(|g| g.0)),
            opt_float(gain.map(|g| g.1)),
        ]
    });
    write_table(out, "comparison", &COMPARISON_COLUMNS, rows)
}

pub fn write_per_seed<W: Write>(table: &ComparisonTable, out: W) -> std::io::Result<()> {
    let rows = table.rows.iter().flat_map(|r| {
        r.per_seed.iter().map(move |s| {
            vec![
                r.agent.to_string(),
                s.index.to_string(),
                s.episode_seed.to_string(),
                fmt_float(s.metrics.avg_throughput_bps),
                fmt_float(s.metrics.avg_delay_ms),
                fmt_float(s.metrics.drop_ratio),
                format!("{:016x}", s.trace_hash),
            ]
        })
    });
    write_table(out, "per-seed", &PER_SEED_COLUMNS, rows)
}

pub fn write_training<W: Write>(
    history: &[(AgentKind, Vec<EpisodeSummary>)],
    out: W,
) -> std::io::Result<()> {
    let rows = history.iter().flat_map(|(k, h)| {
        h.iter().map(move |s| {
            vec![
                k.to_string(),
                s.index.to_string(),
                s.episode_seed.to_string(),
                fmt_float(s.metrics.avg_throughput_bps),
                fmt_float(s.metrics.avg_delay_ms),
                fmt_float(s.metrics.drop_ratio),
                fmt_float(s.mean_reward),
            ]
        })
    });
    write_table(out, "training", &TRAINING_COLUMNS, rows)
}

pub fn write_queues<W: Write>(log: &EpisodeLog, out: W) -> std::io::Result<()> {
    let rows = log.records.iter().flat_map(|r| {
        r.queues.iter().map(move |q| {
            vec![
                r.tti.to_string(),
                q.bs_id.to_string(),
                fmt_float(q.occupancy),
                q.served_bits.to_string(),
                q.dropped_bytes.to_string(),
            ]
        })
    });
    write_table(out, "queues", &QUEUE_COLUMNS, rows)
}

pub fn write_steering<W: Write>(log: &EpisodeLog, out: W) -> std::io::Result<()> {
    let rows = log.decisions.iter().map(|e| {
        vec![
            e.tti.to_string(),
            e.ue_id.to_string(),
            e.traffic_type.to_string(),
            e.chosen.to_string(),
            opt_float(e.active_goal),
            fmt_float(e.occupancy[0]),
            fmt_float(e.occupancy[1]),
            opt_float(e.reward),
            e.previous.map(|r| r.to_string()).unwrap_or_default(),
        ]
    });
    write_table(out, "steering", &STEERING_COLUMNS, rows)
}

pub fn write_topology<W: Write>(topology: &Topology, out: W) -> std::io::Result<()> {
    let bs = topology.base_stations.iter().map(|b| {
        vec![
            "bs".into(),
            b.id.to_string(),
            b.rat.to_string(),
            fmt_float(b.position.x),
            fmt_float(b.position.y),
            String::new(),
            String::new(),
        ]
    });
    let ues = topology.ues.iter().map(|u| {
        vec![
            "ue".into(),
            u.id.to_string(),
            String::new(),
            fmt_float(u.position.x),
            fmt_float(u.position.y),
            u.traffic_type.to_string(),
            u.serving.nr.to_string(),
        ]
    });
    write_table(out, "topology", &TOPOLOGY_COLUMNS, bs.chain(ues))
}

pub fn write_traffic<W: Write>(packets: &[Packet], out: W) -> std::io::Result<()> {
    let rows = packets.iter().map(|p| {
        vec![
            p.arrival_tti.to_string(),
            p.flow_id.to_string(),
            p.size_bytes.to_string(),
        ]
    });
    write_table(out, "traffic", &TRAFFIC_COLUMNS, rows)
}

pub fn emit_comparison_csv(table: &ComparisonTable, path: &Path) -> Result<()> {
    to_file(path, |b| write_comparison(table, b))
}

pub fn emit_per_seed_csv(table: &ComparisonTable, path: &Path) -> Result<()> {
    to_file(path, |b| write_per_seed(table, b))
}

pub fn emit_training_csv(history: &[(AgentKind, Vec<EpisodeSummary>)], path: &Path) -> Result<()> {
    to_file(path, |b| write_training(history, b))
}

pub fn emit_queue_csv(log: &EpisodeLog, path: &Path) -> Result<()> {
    to_file(path, |b| write_queues(log, b))
}

pub fn emit_steering_csv(log: &EpisodeLog, path: &Path) -> Result<()> {
    to_file(path, |b| write_steering(log, b))
}

pub fn emit_topology_csv(topology: &Topology, path: &Path) -> Result<()> {
    to_file(path, |b| write_topology(topology, b))
}

pub fn emit_traffic_csv(packets: &[Packet], path: &Path) -> Result<()> {
    to_file(path, |b| write_traffic(packets, b))
}

/// A parsed CSV file: header row and string records, comments skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn floats(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column(name)?;
        self.rows.iter().map(|r| r[i].parse().ok()).collect()
    }
}

pub fn parse_csv(bytes: &[u8]) -> std::result::Result<CsvTable, ::csv::Error> {
    let mut r = ::csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(bytes);
    let columns = r.headers()?.iter().map(str::to_owned).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(str::to_owned).collect()))
        .collect::<std::result::Result<_, _>>()?;
    Ok(CsvTable { columns, rows })
}

pub fn read_csv(path: &Path) -> Result<CsvTable> {
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(&bytes).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn bad_csv(path: &Path, message: String) -> Error {
    Error::Usage(format!("{}: {message}", path.display()))
}

fn require(t: &CsvTable, path: &Path, cols: &[&str]) -> Result<Vec<usize>> {
    cols.iter()
        .map(|c| {
            t.column(c)
                .ok_or_else(|| bad_csv(path, format!("missing column `{c}`")))
        })
        .collect()
}

/// Rebuilds a comparison table (summary statistics only) from its CSV.
pub fn read_comparison(path: &Path) -> Result<ComparisonTable> {
    use super::experiment::{AgentRow, Stats};
    let t = read_csv(path)?;
    let idx = require(&t, path, &COMPARISON_COLUMNS[..9])?;
    let mut rows = Vec::new();
    for r in &t.rows {
        let f = |i: usize| {
            r[idx[i]]
                .parse::<f64>()
                .map_err(|_| bad_csv(path, format!("bad number `{}`", r[idx[i]])))
        };
        let agent: AgentKind = r[idx[0]].parse()?;
        rows.push(AgentRow {
            agent,
            per_seed: Vec::new(),
            throughput_bps: Stats {
                mean: f(1)?,
                std: f(2)?,
                median: f(7)?,
            },
            delay_ms: Stats {
                mean: f(3)?,
                std: f(4)?,
                median: f(8)?,
            },
            drop_ratio: Stats {
                mean: f(5)?,
                std: f(6)?,
                median: f(5)?,
            },
        });
    }
    Ok(ComparisonTable { rows })
}

/// Rebuilds the decision list of an episode from its steering CSV.
pub fn read_steering(path: &Path) -> Result<EpisodeLog> {
    use super::episode::SteeringEvent;
    use crate::queue::MetricsWindow;
    let t = read_csv(path)?;
    let idx = require(&t, path, &STEERING_COLUMNS)?;
    let mut decisions = Vec::new();
    for r in &t.rows {
        let field = |i: usize| r[idx[i]].as_str();
        let num = |i: usize| {
            field(i)
                .parse::<f64>()
                .map_err(|_| bad_csv(path, format!("bad number `{}`", field(i))))
        };
        let opt = |i: usize| {
            if field(i).is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        let int = |i: usize| {
            field(i)
                .parse::<u64>()
                .map_err(|_| bad_csv(path, format!("bad integer `{}`", field(i))))
        };
        let rat = |s: &str| {
            s.parse::<crate::radio::Rat>()
                .map_err(|_| bad_csv(path, format!("bad RAT `{s}`")))
        };
        decisions.push(SteeringEvent {
            tti: int(0)?,
            ue_id: int(1)? as usize,
            traffic_type: field(2)
                .parse()
                .map_err(|_| bad_csv(path, format!("bad traffic type `{}`", field(2))))?,
            chosen: rat(field(3))?,
            active_goal: opt(4)?,
            occupancy: [num(5)?, num(6)?],
            reward: opt(7)?,
            previous: if field(8).is_empty() {
                None
            } else {
                Some(rat(field(8))?)
            },
        });
    }
    let n_ues = decisions.iter().map(|d| d.ue_id + 1).max().unwrap_or(0);
    let mut ue_types = vec![crate::traffic::TrafficType::Voice; n_ues];
    for d in &decisions {
        ue_types[d.ue_id] = d.traffic_type;
    }
    Ok(EpisodeLog {
        agent: AgentKind::Heuristic,
        episode_seed: 0,
        training: false,
        episode_ttis: decisions.iter().map(|d| d.tti + 1).max().unwrap_or(0),
        n_ues,
        ue_types,
        ue_serving: Vec::new(),
        records: Vec::new(),
        decisions,
        rewards: Vec::new(),
        hdqn: None,
        metrics: MetricsWindow::default(),
        metrics_by_type: [MetricsWindow::default(); 3],
        trace_hash: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::experiment::AgentRow;
    use crate::queue::MetricsWindow;

    fn summary(i: usize, thr: f64, delay: f64) -> EpisodeSummary {
        EpisodeSummary {
            index: i,
            episode_seed: 100 + i as u64,
            metrics: MetricsWindow {
                window_ttis: 10,
                avg_throughput_bps: thr,
                avg_delay_ms: delay,
                drop_ratio: 0.01,
            },
            trace_hash: 0xabc,
            mean_reward: 0.25,
        }
    }

    fn table() -> ComparisonTable {
        ComparisonTable {
            rows: vec![
                AgentRow::new(
                    AgentKind::Hdqn,
                    vec![summary(0, 2.2e7, 10.0), summary(1, 2.4e7, 12.0)],
                ),
                AgentRow::new(
                    AgentKind::Dqn,
                    vec![summary(0, 2.0e7, 20.0), summary(1, 2.2e7, 22.0)],
                ),
                AgentRow::new(
                    AgentKind::Heuristic,
                    vec![summary(0, 1.9e7, 30.0), summary(1, 1.9e7, 30.0)],
                ),
            ],
        }
    }

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_float(0.0), "0");
        assert_eq!(fmt_float(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_float(123456789123.0), "123456789000");
        assert_eq!(fmt_float(-2.5), "-2.5");
    }

    #[test]
    fn comparison_schema() {
        let mut buf = Vec::new();
        write_comparison(&table(), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# ratsteer comparison v1\r\nagent,"));
        let t = parse_csv(&buf).unwrap();
        assert_eq!(
            t.columns[..6],
            [
                "agent",
                "throughput_bps_mean",
                "throughput_bps_std",
                "delay_ms_mean",
                "delay_ms_std",
                "drop_ratio_mean"
            ]
        );
        assert_eq!(t.rows.len(), 3);
        assert_eq!(
            t.floats("throughput_bps_mean").unwrap(),
            vec![2.3e7, 2.1e7, 1.9e7]
        );
        assert_eq!(
            t.floats("hdqn_delay_gain").unwrap()[2],
            fmt_float((11.0 - 30.0) / 30.0).parse::<f64>().unwrap()
        );
    }

    #[test]
    fn round_trip_values() {
        let mut buf = Vec::new();
        write_per_seed(&table(), &mut buf).unwrap();
        let t = parse_csv(&buf).unwrap();
        assert_eq!(
            t.floats("throughput_bps").unwrap(),
            vec![2.2e7, 2.4e7, 2.0e7, 2.2e7, 1.9e7, 1.9e7]
        );
        assert_eq!(t.rows[0][0], "hdqn");
    }

    #[test]
    fn empty_log_is_header_only() {
        let log = EpisodeLog {
            agent: AgentKind::Heuristic,
            episode_seed: 0,
            training: false,
            episode_ttis: 0,
            n_ues: 0,
            ue_types: vec![],
            ue_serving: vec![],
            records: vec![],
            decisions: vec![],
            rewards: vec![],
            hdqn: None,
            metrics: MetricsWindow::default(),
            metrics_by_type: [MetricsWindow::default(); 3],
            trace_hash: 0,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/queues.csv");
        emit_queue_csv(&log, &path).unwrap();
        let t = read_csv(&path).unwrap();
        assert_eq!(t.columns, QUEUE_COLUMNS);
        assert!(t.rows.is_empty());
    }

    #[test]
    fn io_errors_carry_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let bad = blocker.join("out.csv");
        match emit_comparison_csv(&table(), &bad) {
            Err(Error::Io { path, .. }) => assert!(path.starts_with(&blocker)),
            other => panic!("unexpected {other:?}"),
        }
    }
}
