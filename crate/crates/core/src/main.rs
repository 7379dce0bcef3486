use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ratsteer::harness::csv::{
    emit_comparison_csv, emit_per_seed_csv, emit_queue_csv, emit_steering_csv, emit_topology_csv,
    emit_traffic_csv, emit_training_csv, read_comparison, read_steering,
};
use ratsteer::harness::experiment::{evaluate, AgentRow, ComparisonTable};
use ratsteer::harness::plot::{emit_bars, emit_timeline, PlotKind};
use ratsteer::harness::seed::{eval_episode_seed, topology_seed};
use ratsteer::harness::{
    load_agent, run_episode, run_experiment, save_agent, traffic_trace, train_agent, AgentBundle,
    AgentKind, EpisodeOptions, ExperimentConfig, Scenario,
};
use ratsteer::radio::build_topology;
use ratsteer::Result;

#[derive(Parser)]
#[command(
    name = "ratsteer",
    version,
    about = "LTE/NR traffic steering simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides experiment.master_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides experiment.agent.
    #[arg(long)]
    agent: Option<String>,
    /// Output directory (overrides experiment.output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one evaluation episode and dump its queue, steering and topology CSVs.
    Run {
        #[command(flatten)]
        common: Common,
        /// Scenario file with timed UE arrivals.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Directory holding checkpoints written by `train`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Also write every generated packet to traffic.csv.
        #[arg(long)]
        trace: bool,
    },
    /// Train an agent and save its checkpoints.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate an agent on the evaluation seeds.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train and evaluate all three schemes on shared seeds.
    Compare {
        #[command(flatten)]
        common: Common,
    },
    /// Render an SVG from a comparison or steering CSV.
    Plot {
        /// bars (comparison.csv) or timeline (steering.csv).
        #[arg(long)]
        kind: String,
        #[arg(long)]
        input: PathBuf,
        /// Output SVG path.
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(common: &Common) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.experiment.master_seed = s;
    }
    if let Some(a) = &common.agent {
        cfg.experiment.agent = a.parse()?;
    }
    if let Some(o) = &common.out {
        cfg.experiment.output_dir = o.clone();
    }
    cfg.validate()?;
    let out = cfg.experiment.output_dir.clone();
    Ok((cfg, out))
}

fn agent_for(cfg: &ExperimentConfig, checkpoint: Option<&Path>) -> Result<AgentBundle> {
    match checkpoint {
        Some(dir) => load_agent(cfg.experiment.agent, cfg, dir),
        None => Ok(AgentBundle::new(cfg.experiment.agent, cfg)),
    }
}

fn print_table(table: &ComparisonTable) {
    println!(
        "{:<10} {:>16} {:>12} {:>12} {:>10} {:>10}",
        "agent", "throughput_bps", "±std", "delay_ms", "±std", "drop"
    );
    for r in &table.rows {
        println!(
            "{:<10} {:>16.1} {:>12.1} {:>12.3} {:>10.3} {:>10.5}",
            r.agent.as_str(),
            r.throughput_bps.mean,
            r.throughput_bps.std,
            r.delay_ms.mean,
            r.delay_ms.std,
            r.drop_ratio.mean
        );
    }
    for k in [AgentKind::Dqn, AgentKind::Heuristic] {
        if let (Some((thr, delay)), true) = (table.hdqn_gain(k), table.row(k).is_some()) {
            println!(
                "hdqn vs {k}: throughput {:+.2}%, delay {:+.2}%",
                thr * 100.0,
                delay * 100.0
            );
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            common,
            scenario,
            checkpoint,
            trace,
        } => {
            let (cfg, out) = load_config(&common)?;
            let scenario = scenario.as_deref().map(Scenario::load).transpose()?;
            let mut agent = agent_for(&cfg, checkpoint.as_deref())?;
            let seed = eval_episode_seed(cfg.experiment.master_seed, 0);
            let log = run_episode(
                &cfg,
                &mut agent,
                seed,
                scenario.as_ref(),
                EpisodeOptions::default(),
            )?;
            let mut topo = build_topology(&cfg.topology, &cfg.traffic, topology_seed(seed))?;
            if let Some(s) = &scenario {
                s.apply(&mut topo)?;
            }
            emit_queue_csv(&log, &out.join("queues.csv"))?;
            emit_steering_csv(&log, &out.join("steering.csv"))?;
            if trace {
                emit_traffic_csv(
                    &traffic_trace(&topo, seed, cfg.episode.episode_ttis)?,
                    &out.join("traffic.csv"),
                )?;
            }
            emit_topology_csv(&topo, &out.join("topology.csv"))?;
            let m = log.metrics;
            println!(
                "{}: throughput {:.1} bps, delay {:.3} ms, drop ratio {:.5}, {} switches",
                log.agent,
                m.avg_throughput_bps,
                m.avg_delay_ms,
                m.drop_ratio,
                log.switches().count()
            );
        }
        Command::Train { common } => {
            let (cfg, out) = load_config(&common)?;
            let kind = cfg.experiment.agent;
            let (agent, history) = train_agent(&cfg, kind)?;
            let files = save_agent(&agent, &out)?;
            emit_training_csv(&[(kind, history)], &out.join("training.csv"))?;
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        Command::Eval { common, checkpoint } => {
            let (cfg, out) = load_config(&common)?;
            let agent = agent_for(&cfg, checkpoint.as_deref())?;
            let table = ComparisonTable {
                rows: vec![AgentRow::new(agent.kind(), evaluate(&cfg, &agent, None)?)],
            };
            emit_comparison_csv(&table, &out.join("comparison.csv"))?;
            emit_per_seed_csv(&table, &out.join("per_seed.csv"))?;
            print_table(&table);
        }
        Command::Compare { common } => {
            let (cfg, out) = load_config(&common)?;
            let result = run_experiment(&cfg, &AgentKind::ALL)?;
            emit_comparison_csv(&result.table, &out.join("comparison.csv"))?;
            emit_per_seed_csv(&result.table, &out.join("per_seed.csv"))?;
            emit_training_csv(&result.training, &out.join("training.csv"))?;
            emit_bars(&result.table, &out.join("bars.svg"))?;
            for a in &result.agents {
                save_agent(a, &out.join("checkpoints"))?;
            }
            print_table(&result.table);
        }
        Command::Plot { kind, input, out } => match kind.parse::<PlotKind>()? {
            PlotKind::Bars => emit_bars(&read_comparison(&input)?, &out)?,
            PlotKind::Timeline => emit_timeline(&read_steering(&input)?, &out)?,
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
