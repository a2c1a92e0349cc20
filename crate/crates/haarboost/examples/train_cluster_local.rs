//! Runs a full cluster job on this machine — master and three workers as
//! separate processes talking over loopback TCP — then checks the result
//! against plain sequential training and prints each node's phase timings.
//!
//! Build the role binary first: `cargo build --bin haarboost`, then
//! `cargo run --example train_cluster_local`.

use std::path::PathBuf;
use std::time::Duration;

use haarboost::boosting::{train, SequentialExecutor};
use haarboost::cluster::{simulate_local, SimConfig, Topology};
use haarboost::dataset::{load, DatasetRef};
use haarboost::features::FeatureTable;
use haarboost::{model, WINDOW};

/// The role binary lives two directories up from the example binary
/// (`target/debug/examples/..` -> `target/debug`).
fn role_binary() -> PathBuf {
    let exe = std::env::current_exe().expect("current exe path");
    let bin = exe
        .parent()
        .and_then(|p| p.parent())
        .map(|p| p.join(format!("haarboost{}", std::env::consts::EXE_SUFFIX)));
    match bin {
        Some(p) if p.exists() => p,
        _ => {
            eprintln!("role binary not built; run `cargo build --bin haarboost` first");
            std::process::exit(1);
        }
    }
}

fn main() {
    let dataset_ref = DatasetRef::Synth {
        seed: 7,
        positives: 30,
        negatives: 30,
    };
    let rounds = 2;
    let limit = 3_000;

    let cfg = SimConfig {
        binary: role_binary(),
        topology: Topology::OneLevel { workers: 3 },
        dataset: dataset_ref.clone(),
        rounds,
        limit: Some(limit),
        worker_budget: 1,
        timeout: Duration::from_secs(60),
    };
    let outcome = simulate_local(&cfg).expect("cluster job completes");
    println!(
        "cluster finished: {} rounds, model {} bytes",
        outcome.classifier.rounds.len(),
        outcome.model_json.len()
    );

    // The same job run in one process must produce the same bytes.
    let dataset = load(&dataset_ref).unwrap();
    let table = FeatureTable::enumerate(WINDOW);
    let seq = train(&dataset, &table, limit, rounds, &mut SequentialExecutor, |_| ()).unwrap();
    assert_eq!(model::to_json(&seq.classifier).unwrap(), outcome.model_json);
    println!("model matches sequential training byte for byte");

    println!("\nper-node timings:");
    for t in &outcome.timings {
        println!(
            "  {:<8} round {} {:<9} {:.4}s",
            t.node_id,
            t.timing.round,
            t.timing.phase.name(),
            t.timing.seconds
        );
    }
}
