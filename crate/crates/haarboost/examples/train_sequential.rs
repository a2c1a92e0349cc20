//! Trains a small strong classifier sequentially on a synthetic dataset and
//! prints the per-round picks, the timing breakdown, and the final training
//! error.
//!
//! Run with: `cargo run --example train_sequential`

use haarboost::boosting::{train, SequentialExecutor};
use haarboost::dataset::synth;
use haarboost::features::FeatureTable;
use haarboost::WINDOW;

fn main() {
    let dataset = synth(7, 50, 50);
    println!("dataset: {}", dataset.manifest());

    let table = FeatureTable::enumerate(WINDOW);
    let rounds = 5;
    let outcome = train(
        &dataset,
        &table,
        table.census().total,
        rounds,
        &mut SequentialExecutor,
        |report| {
            let r = &report.record;
            println!(
                "round {}: feature #{:<6} theta {:>9.1} polarity {:+} error {:.6} alpha {:.4} ({:.2}s)",
                report.round,
                r.weak.feature_index,
                r.weak.theta,
                r.weak.polarity,
                r.weak.error,
                r.alpha,
                report.seconds
            );
        },
    )
    .expect("training succeeds");

    let err = outcome.classifier.training_error(dataset.examples());
    println!("training error after {rounds} rounds: {err:.4}");
    println!("average round time: {:.2}s", outcome.avg_round_seconds());
}
