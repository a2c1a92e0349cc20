//! Command-line interface: training in all three modes, cluster roles,
//! classification, feature counts, and the bench harness. The binary in
//! `src/main.rs` is a thin wrapper over [`main_entry`].

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::boosting::{RoundExecutor, RoundReport, RoundTiming, SequentialExecutor};
use crate::cluster::{
    run_master, run_submaster, run_worker, simulate_local, MasterConfig, NodeTiming, SimConfig,
    SubMasterConfig, Topology, WorkerConfig,
};
use crate::dataset::{load, load_pgm, DatasetRef};
use crate::engine::ParallelExecutor;
use crate::features::{census, FeatureType};
use crate::imaging::IntegralImage;
use crate::perfmodel::{
    fit_coefficients, optimal_fanout, predict_round_time, render_table, speedup_report,
    to_csv, BenchTiming, Measurement, PredictiveModelInput, REF_COEFF_COMM, REF_COEFF_COMPUTE,
};
use crate::{model, Error, Result, WINDOW};

#[derive(Parser)]
#[command(
    name = "haarboost",
    version,
    about = "AdaBoost training for Haar-feature window classifiers: sequential, multi-core, and clustered"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a classifier and write its model file.
    Train(TrainArgs),
    /// Run one node of a training cluster.
    #[command(subcommand)]
    Role(RoleCmd),
    /// Classify one 24x24 PGM window with a trained model.
    Classify(ClassifyArgs),
    /// Print feature counts for a window size.
    Features(FeaturesArgs),
    /// Performance model predictions, fitting, and local sweeps.
    #[command(subcommand)]
    Bench(BenchCmd),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Seq,
    Par,
    Cluster,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TopologyArg {
    /// Workers attach directly to the master.
    One,
    /// Five sub-masters attach to the master, workers attach to them.
    Two,
}

#[derive(Args)]
struct TrainArgs {
    /// Directory of positive 24x24 PGM examples.
    #[arg(long, requires = "neg", conflicts_with = "synth")]
    pos: Option<PathBuf>,
    /// Directory of negative 24x24 PGM examples.
    #[arg(long, requires = "pos", conflicts_with = "synth")]
    neg: Option<PathBuf>,
    /// Synthetic dataset as SEED,POSITIVES,NEGATIVES.
    #[arg(long, value_name = "SEED,L,M", value_parser = parse_synth)]
    synth: Option<DatasetRef>,
    /// Boosting rounds.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    rounds: u32,
    /// Execution strategy.
    #[arg(long, value_enum, default_value = "seq")]
    mode: Mode,
    /// Scan concurrency for par mode (and the default local budget).
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    workers: Option<u32>,
    /// Cluster shape (cluster mode).
    #[arg(long, value_enum, default_value = "one")]
    topology: TopologyArg,
    /// Nodes per (sub-)master (cluster mode).
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
    fanout: u32,
    /// Where to write the model file.
    #[arg(long)]
    out: PathBuf,
    /// Restrict training to the first N features (all strategies honor the
    /// same prefix).
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u32).range(1..))]
    max_features: Option<u32>,
    /// Master bind address (cluster mode), e.g. 0.0.0.0:9000.
    #[arg(long)]
    listen: Option<String>,
    /// Seconds to wait for connections and per-message replies.
    #[arg(long, default_value_t = 120.0)]
    timeout: f64,
}

#[derive(Subcommand)]
enum RoleCmd {
    /// Coordinate a job: accept children, drive rounds, write the model.
    Master(MasterArgs),
    /// Relay between a master and a group of workers.
    Submaster(SubmasterArgs),
    /// Scan assigned feature ranges.
    Worker(WorkerArgs),
}

#[derive(Args)]
struct MasterArgs {
    /// Bind address (port 0 picks a free port; announced as LISTENING).
    #[arg(long)]
    listen: String,
    /// Direct children to wait for.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    expect: u32,
    /// Dataset reference: synth:SEED,L,M or pgm:POS_DIR,NEG_DIR.
    #[arg(long)]
    data: DatasetRef,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    rounds: u32,
    /// Where to write the model file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 120.0)]
    timeout: f64,
    #[arg(long, default_value = "master")]
    node_id: String,
    /// Restrict the job to the first N features.
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u32).range(1..))]
    max_features: Option<u32>,
}

#[derive(Args)]
struct SubmasterArgs {
    /// The master's address.
    #[arg(long)]
    parent: String,
    /// Bind address for this node's workers.
    #[arg(long)]
    listen: String,
    /// Workers to wait for.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    expect: u32,
    #[arg(long, default_value_t = 120.0)]
    timeout: f64,
    #[arg(long, default_value = "submaster")]
    node_id: String,
}

#[derive(Args)]
struct WorkerArgs {
    /// The parent's address (master or sub-master).
    #[arg(long)]
    parent: String,
    #[arg(long, default_value_t = 120.0)]
    timeout: f64,
    #[arg(long, default_value = "worker")]
    node_id: String,
    /// Local scan concurrency.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    workers: u32,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Model file written by train.
    #[arg(long)]
    model: PathBuf,
    /// A 24x24 binary PGM image.
    #[arg(long)]
    image: PathBuf,
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(long, default_value_t = WINDOW, value_parser = clap::value_parser!(u32).range(3..))]
    window: u32,
    /// Print per-type and total feature counts.
    #[arg(long)]
    counts: bool,
}

#[derive(Subcommand)]
enum BenchCmd {
    /// Predict one round's seconds for n nodes scanning m features.
    Predict(PredictArgs),
    /// Fit the cost coefficients from a CSV of measurements.
    Fit(FitArgs),
    /// Measure modes locally and emit a speedup report.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct PredictArgs {
    /// Nodes attached to one sub-master.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    n: u32,
    /// Features allocated to that sub-master.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    m: u32,
    /// Also print the fan-out that minimizes the prediction.
    #[arg(long)]
    optimal: bool,
}

#[derive(Args)]
struct FitArgs {
    /// CSV with columns n,m,seconds (header optional).
    #[arg(long)]
    csv: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated subset of: seq,par,one,two.
    #[arg(long, value_delimiter = ',', required = true)]
    modes: Vec<String>,
    /// Synthetic dataset as SEED,POSITIVES,NEGATIVES.
    #[arg(long, value_name = "SEED,L,M", value_parser = parse_synth, required = true)]
    synth: DatasetRef,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    rounds: u32,
    /// Restrict every mode to the first N features.
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u32).range(1..))]
    max_features: Option<u32>,
    /// Scan concurrency for par mode and per-worker budget for cluster
    /// modes.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    workers: Option<u32>,
    /// Workers per (sub-)master in cluster modes.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
    fanout: u32,
    /// Where to write the CSV report.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 120.0)]
    timeout: f64,
}

fn parse_synth(s: &str) -> std::result::Result<DatasetRef, String> {
    format!("synth:{s}").parse()
}

/// Parses argv, runs the chosen command, and maps failures to exit codes:
/// 0 success, 1 runtime failure, 2 usage error (clap's convention).
pub fn main_entry() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Train(args) => cmd_train(args),
        Cmd::Role(cmd) => cmd_role(cmd),
        Cmd::Classify(args) => cmd_classify(args),
        Cmd::Features(args) => cmd_features(args),
        Cmd::Bench(cmd) => cmd_bench(cmd),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn usage_error(message: &str) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(2)
}

fn print_round(report: &RoundReport) {
    let r = &report.record;
    println!(
        "round={} feature={} error={} alpha={} seconds={:.3}",
        report.round, r.weak.feature_index, r.weak.error, r.alpha, report.seconds
    );
}

fn print_timings(node_id: &str, timings: &[RoundTiming]) {
    let mut stdout = std::io::stdout().lock();
    for t in timings {
        let _ = writeln!(
            stdout,
            "TIMING node={} round={} phase={} seconds={:.6}",
            node_id,
            t.round,
            t.phase.name(),
            t.seconds
        );
    }
    let _ = stdout.flush();
}

fn dataset_ref_from_train(args: &TrainArgs) -> std::result::Result<DatasetRef, ExitCode> {
    match (&args.synth, &args.pos, &args.neg) {
        (Some(r), None, None) => Ok(r.clone()),
        (None, Some(pos), Some(neg)) => Ok(DatasetRef::Pgm {
            positives: pos.clone(),
            negatives: neg.clone(),
        }),
        _ => Err(usage_error(
            "a dataset is required: --synth SEED,L,M or --pos DIR --neg DIR",
        )),
    }
}

fn default_workers() -> u32 {
    std::thread::available_parallelism()
        .map(|n| n.get() as u32)
        .unwrap_or(1)
}

fn cmd_train(args: TrainArgs) -> Result<ExitCode> {
    let dsref = match dataset_ref_from_train(&args) {
        Ok(r) => r,
        Err(code) => return Ok(code),
    };
    let timeout = Duration::from_secs_f64(args.timeout);
    match args.mode {
        Mode::Seq | Mode::Par => {
            let started = Instant::now();
            let dataset = load(&dsref)?;
            eprintln!(
                "loaded {} in {:.3}s",
                dataset.manifest(),
                started.elapsed().as_secs_f64()
            );
            let table = crate::features::FeatureTable::enumerate(WINDOW);
            let total = table.census().total;
            let limit = args.max_features.unwrap_or(total).min(total);
            let mut seq = SequentialExecutor;
            let mut par;
            let executor: &mut dyn RoundExecutor = match args.mode {
                Mode::Seq => &mut seq,
                Mode::Par => {
                    par = ParallelExecutor::new(
                        args.workers.unwrap_or_else(default_workers) as usize
                    );
                    &mut par
                }
                Mode::Cluster => unreachable!(),
            };
            let outcome = crate::boosting::train(
                &dataset,
                &table,
                limit,
                args.rounds,
                executor,
                print_round,
            )?;
            model::save(&outcome.classifier, &args.out)?;
            print_timings("local", &outcome.timings);
            eprintln!("model written to {}", args.out.display());
            Ok(ExitCode::SUCCESS)
        }
        Mode::Cluster => {
            let Some(listen) = args.listen else {
                return Ok(usage_error(
                    "--mode cluster requires --listen ADDR (start workers with: role worker --parent ADDR)",
                ));
            };
            let expect = match args.topology {
                TopologyArg::One => args.fanout,
                // The classic shape: five sub-masters, each fanning out.
                TopologyArg::Two => 5,
            };
            let cfg = MasterConfig {
                listen,
                expect,
                dataset: dsref,
                rounds: args.rounds,
                limit: args.max_features,
                timeout,
                node_id: "master".to_string(),
                out: Some(args.out.clone()),
            };
            let outcome = run_master(
                &cfg,
                |addr| {
                    println!("LISTENING {addr}");
                    let _ = std::io::stdout().flush();
                },
                print_round,
            )?;
            print_timings("master", &outcome.timings);
            eprintln!("model written to {}", args.out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn cmd_role(cmd: RoleCmd) -> Result<ExitCode> {
    match cmd {
        RoleCmd::Master(args) => {
            let cfg = MasterConfig {
                listen: args.listen,
                expect: args.expect,
                dataset: args.data,
                rounds: args.rounds,
                limit: args.max_features,
                timeout: Duration::from_secs_f64(args.timeout),
                node_id: args.node_id.clone(),
                out: args.out,
            };
            let outcome = run_master(
                &cfg,
                |addr| {
                    println!("LISTENING {addr}");
                    let _ = std::io::stdout().flush();
                },
                |report| {
                    let r = &report.record;
                    eprintln!(
                        "round={} feature={} error={} alpha={} seconds={:.3}",
                        report.round, r.weak.feature_index, r.weak.error, r.alpha, report.seconds
                    );
                },
            )?;
            print_timings(&args.node_id, &outcome.timings);
            Ok(ExitCode::SUCCESS)
        }
        RoleCmd::Submaster(args) => {
            let cfg = SubMasterConfig {
                parent: args.parent,
                listen: args.listen,
                expect: args.expect,
                timeout: Duration::from_secs_f64(args.timeout),
                node_id: args.node_id.clone(),
            };
            let timings = run_submaster(&cfg, |addr| {
                println!("LISTENING {addr}");
                let _ = std::io::stdout().flush();
            })?;
            print_timings(&args.node_id, &timings);
            Ok(ExitCode::SUCCESS)
        }
        RoleCmd::Worker(args) => {
            let cfg = WorkerConfig {
                parent: args.parent,
                timeout: Duration::from_secs_f64(args.timeout),
                node_id: args.node_id.clone(),
                workers: args.workers,
            };
            let timings = run_worker(&cfg)?;
            print_timings(&args.node_id, &timings);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn cmd_classify(args: ClassifyArgs) -> Result<ExitCode> {
    let sc = model::load(&args.model)?;
    let image = load_pgm(&args.image)?;
    if image.width() != WINDOW || image.height() != WINDOW {
        return Err(Error::DatasetFile {
            path: args.image,
            reason: format!(
                "expected 24x24, got {}x{}",
                image.width(),
                image.height()
            ),
        });
    }
    let ii = IntegralImage::from_image(&image);
    println!("{}", sc.classify(&ii));
    Ok(ExitCode::SUCCESS)
}

fn cmd_features(args: FeaturesArgs) -> Result<ExitCode> {
    let c = census(args.window);
    for (ftype, count) in FeatureType::ALL.iter().zip(c.per_type) {
        println!("{} {}", ftype.name(), count);
    }
    println!("total {}", c.total);
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(cmd: BenchCmd) -> Result<ExitCode> {
    match cmd {
        BenchCmd::Predict(args) => {
            let input = PredictiveModelInput::reference(args.n, args.m);
            println!("{:.1}", predict_round_time(&input));
            if args.optimal {
                let (n_star, n_int) = optimal_fanout(args.m, REF_COEFF_COMM, REF_COEFF_COMPUTE);
                println!("optimal_fanout={n_int} stationary_point={n_star:.3}");
            }
            Ok(ExitCode::SUCCESS)
        }
        BenchCmd::Fit(args) => {
            let text = std::fs::read_to_string(&args.csv)?;
            let measurements = parse_measurements(&text)
                .map_err(|reason| Error::PerfModel(format!("{}: {reason}", args.csv.display())))?;
            let (a, b) = fit_coefficients(&measurements)?;
            println!("coeff_comm={a}");
            println!("coeff_compute={b}");
            Ok(ExitCode::SUCCESS)
        }
        BenchCmd::Sweep(args) => cmd_bench_sweep(args),
    }
}

fn parse_measurements(text: &str) -> std::result::Result<Vec<Measurement>, String> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if lineno == 0 && line.chars().any(|c| c.is_ascii_alphabetic()) {
            continue; // header
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(format!("line {}: expected n,m,seconds", lineno + 1));
        }
        let parse = |what: &str, s: &str| -> std::result::Result<f64, String> {
            s.parse::<f64>()
                .map_err(|e| format!("line {}: bad {what} {s:?}: {e}", lineno + 1))
        };
        let n = parse("n", fields[0])? as u32;
        let m = parse("m", fields[1])? as u32;
        let seconds = parse("seconds", fields[2])?;
        if n == 0 || m == 0 {
            return Err(format!("line {}: n and m must be positive", lineno + 1));
        }
        rows.push(Measurement { n, m, seconds });
    }
    Ok(rows)
}

fn avg_master_round(timings: &[NodeTiming], rounds: u32) -> f64 {
    // A master round's wall time is normalize + scan + update; reduce is
    // nested inside scan.
    let total: f64 = timings
        .iter()
        .filter(|t| t.node_id == "master" && t.timing.phase != crate::boosting::Phase::Reduce)
        .map(|t| t.timing.seconds)
        .sum();
    total / rounds as f64
}

fn cmd_bench_sweep(args: SweepArgs) -> Result<ExitCode> {
    let budget = args.workers.unwrap_or_else(default_workers);
    let mut timings: Vec<BenchTiming> = Vec::new();
    for mode in &args.modes {
        let upload_started = Instant::now();
        let dataset = load(&args.synth)?;
        let upload_s = upload_started.elapsed().as_secs_f64();
        let table = crate::features::FeatureTable::enumerate(WINDOW);
        let total = table.census().total;
        let limit = args.max_features.unwrap_or(total).min(total);
        let round_s = match mode.as_str() {
            "seq" => {
                let out = crate::boosting::train(
                    &dataset,
                    &table,
                    limit,
                    args.rounds,
                    &mut SequentialExecutor,
                    |_| (),
                )?;
                out.avg_round_seconds()
            }
            "par" => {
                let mut exec = ParallelExecutor::new(budget as usize);
                let out = crate::boosting::train(
                    &dataset,
                    &table,
                    limit,
                    args.rounds,
                    &mut exec,
                    |_| (),
                )?;
                out.avg_round_seconds()
            }
            "one" | "two" => {
                let topology = if mode == "one" {
                    Topology::OneLevel {
                        workers: args.fanout,
                    }
                } else {
                    Topology::TwoLevel {
                        submasters: 5,
                        fanout: args.fanout,
                    }
                };
                let sim = simulate_local(&SimConfig {
                    binary: std::env::current_exe()?,
                    topology,
                    dataset: args.synth.clone(),
                    rounds: args.rounds,
                    limit: args.max_features,
                    worker_budget: budget,
                    timeout: Duration::from_secs_f64(args.timeout),
                })?;
                avg_master_round(&sim.timings, args.rounds)
            }
            other => {
                return Ok(usage_error(&format!(
                    "unknown mode {other:?} (expected seq, par, one, or two)"
                )))
            }
        };
        eprintln!("measured {mode}: avg round {round_s:.3}s");
        timings.push(BenchTiming {
            label: mode.clone(),
            upload_s,
            round_s,
        });
    }
    let records = speedup_report(&timings, "seq")?;
    print!("{}", render_table(&records));
    if let Some(out) = &args.out {
        std::fs::write(out, to_csv(&records))?;
        eprintln!("report written to {}", out.display());
    }
    Ok(ExitCode::SUCCESS)
}
