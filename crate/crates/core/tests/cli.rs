use std::path::Path;
use std::process::{Command, Output};

use ratsteer::harness::csv::read_csv;

const TINY: &str = "\
[topology]
n_small_cells = 2
n_ues = 8

[episode]
episode_ttis = 400

[experiment]
n_train_episodes = 1
n_eval_episodes = 3
";

fn ratsteer(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ratsteer")).args(args).output().expect("binary runs")
}

fn tiny_config(dir: &Path) -> String {
    let p = dir.join("tiny.toml");
    std::fs::write(&p, TINY).unwrap();
    p.to_str().unwrap().to_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn help_and_usage_exit_codes() {
    assert_eq!(ratsteer(&["--help"]).status.code(), Some(0));
    assert_eq!(ratsteer(&["fly"]).status.code(), Some(1));
    assert_eq!(ratsteer(&["run", "--agent", "random"]).status.code(), Some(1));
    assert_eq!(ratsteer(&["plot", "--kind", "pie", "--input", "x.csv", "--out", "x.svg"]).status.code(), Some(1));
}

#[test]
fn bad_config_and_missing_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[episode]\nbogus = 3\n").unwrap();
    let out = ratsteer(&["run", "--config", p(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));

    let missing = dir.path().join("nope.toml");
    assert_eq!(ratsteer(&["run", "--config", p(&missing)]).status.code(), Some(2));

    let cfg = tiny_config(dir.path());
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let out = ratsteer(&["eval", "--config", &cfg, "--agent", "dqn", "--checkpoint", p(&empty)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_writes_csvs_and_timeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("run");
    let o = ratsteer(&["run", "--config", &cfg, "--agent", "heuristic", "--trace", "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let queues = read_csv(&out.join("queues.csv")).unwrap();
    assert_eq!(queues.columns, ["tti", "bs_id", "occupancy", "served_bits", "dropped_bytes"]);
    // One row per base station (macro + 2 small cells) per TTI.
    assert_eq!(queues.rows.len(), 400 * 3);
    let traffic = read_csv(&out.join("traffic.csv")).unwrap();
    assert_eq!(traffic.columns, ["tti", "flow_id", "size_bytes"]);
    assert!(!traffic.rows.is_empty());
    let topo = read_csv(&out.join("topology.csv")).unwrap();
    assert_eq!(topo.rows.len(), 3 + 8);

    let svg = dir.path().join("timeline.svg");
    let o = ratsteer(&["plot", "--kind", "timeline", "--input", p(&out.join("steering.csv")), "--out", p(&svg)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));

    let again = dir.path().join("again");
    ratsteer(&["run", "--config", &cfg, "--agent", "heuristic", "--trace", "--out", p(&again)]);
    for f in ["queues.csv", "steering.csv", "topology.csv", "traffic.csv"] {
        assert_eq!(std::fs::read(out.join(f)).unwrap(), std::fs::read(again.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn scenario_adds_ues() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let scn = dir.path().join("s.scn");
    std::fs::write(&scn, "at 0 add_ue type=video near=1 count=2\nat 200 add_ue type=gaming near=1\n").unwrap();
    let out = dir.path().join("run");
    let o = ratsteer(&["run", "--config", &cfg, "--agent", "heuristic", "--scenario", p(&scn), "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let topo = read_csv(&out.join("topology.csv")).unwrap();
    assert_eq!(topo.rows.iter().filter(|r| r[0] == "ue").count(), 8 + 3);
    let steering = read_csv(&out.join("steering.csv")).unwrap();
    let ue = steering.column("ue_id").unwrap();
    let tti = steering.column("tti").unwrap();
    let first_of_last = steering.rows.iter().find(|r| r[ue] == "10").map(|r| r[tti].clone());
    assert_eq!(first_of_last.as_deref(), Some("200"));

    let bad = dir.path().join("bad.scn");
    std::fs::write(&bad, "at 0 add_ue type=video near=0\n").unwrap();
    assert_eq!(ratsteer(&["run", "--config", &cfg, "--scenario", p(&bad), "--out", p(&out)]).status.code(), Some(1));
}

#[test]
fn train_then_eval_from_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let ck = dir.path().join("ck");
    let o = ratsteer(&["train", "--config", &cfg, "--agent", "dqn", "--out", p(&ck)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(ck.join("dqn.ckpt").exists());
    assert_eq!(read_csv(&ck.join("training.csv")).unwrap().rows.len(), 1);

    let ev = dir.path().join("eval");
    let o = ratsteer(&["eval", "--config", &cfg, "--agent", "dqn", "--checkpoint", p(&ck), "--out", p(&ev)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let per_seed = read_csv(&ev.join("per_seed.csv")).unwrap();
    assert_eq!(per_seed.rows.len(), 3);

    // An h-DQN cannot be loaded from a flat DQN directory.
    let o = ratsteer(&["eval", "--config", &cfg, "--agent", "hdqn", "--checkpoint", p(&ck), "--out", p(&ev)]);
    assert!(!o.status.success());
}

#[test]
fn compare_table_matches_per_seed_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("cmp");
    let o = ratsteer(&["compare", "--config", &cfg, "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let table = read_csv(&out.join("comparison.csv")).unwrap();
    let per_seed = read_csv(&out.join("per_seed.csv")).unwrap();
    let agents: Vec<&str> = table.rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(agents, ["hdqn", "dqn", "heuristic"]);

    let thr = per_seed.column("throughput_bps").unwrap();
    let hash = per_seed.column("trace_hash").unwrap();
    let mean_col = table.column("throughput_bps_mean").unwrap();
    for row in &table.rows {
        let values: Vec<f64> = per_seed.rows.iter().filter(|r| r[0] == row[0]).map(|r| r[thr].parse().unwrap()).collect();
        assert_eq!(values.len(), 3);
        let mean = values.iter().sum::<f64>() / 3.0;
        let reported: f64 = row[mean_col].parse().unwrap();
        assert!((mean - reported).abs() <= 1e-8 * mean.abs().max(1.0), "{} {mean} {reported}", row[0]);
    }
    // Every agent saw the same traffic on seed i.
    for i in 0..3 {
        let hashes: Vec<&str> = per_seed.rows.iter().filter(|r| r[1] == i.to_string()).map(|r| r[hash].as_str()).collect();
        assert_eq!(hashes.len(), 3);
        assert!(hashes.windows(2).all(|w| w[0] == w[1]));
    }

    let svg = std::fs::read_to_string(out.join("bars.svg")).unwrap();
    assert_eq!(svg.matches(r#"class="group""#).count(), 3);
    assert!(out.join("checkpoints/hdqn_meta.ckpt").exists());
    assert!(out.join("checkpoints/dqn.ckpt").exists());

    let replot = dir.path().join("bars2.svg");
    let o = ratsteer(&["plot", "--kind", "bars", "--input", p(&out.join("comparison.csv")), "--out", p(&replot)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}
