//! Trains a small detector, saves it, loads it back, and classifies
//! held-out windows the trainer never saw, printing a confusion summary.
//!
//! Run with: `cargo run --example classify_window`

use haarboost::boosting::{train, SequentialExecutor};
use haarboost::dataset::synth;
use haarboost::features::FeatureTable;
use haarboost::{model, WINDOW};

fn main() {
    let train_set = synth(7, 60, 60);
    let table = FeatureTable::enumerate(WINDOW);
    let outcome = train(&train_set, &table, 8_000, 4, &mut SequentialExecutor, |_| ()).unwrap();
    println!(
        "trained {} rounds, training error {:.4}",
        outcome.classifier.rounds.len(),
        outcome.classifier.training_error(train_set.examples())
    );

    // Round-trip through the on-disk format, as a deployment would.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("detector.json");
    model::save(&outcome.classifier, &path).unwrap();
    let detector = model::load(&path).unwrap();

    // A different seed draws fresh windows from the same distributions.
    let held_out = synth(99, 50, 50);
    let (mut hits, mut misses, mut false_alarms, mut rejects) = (0u32, 0u32, 0u32, 0u32);
    for ex in held_out.examples() {
        match (ex.label, detector.classify(&ex.image)) {
            (1, 1) => hits += 1,
            (1, 0) => misses += 1,
            (0, 1) => false_alarms += 1,
            (0, 0) => rejects += 1,
            _ => unreachable!("labels are 0 or 1"),
        }
    }
    println!("\nheld-out windows ({}):", held_out.examples().len());
    println!("  positives: {hits} detected, {misses} missed");
    println!("  negatives: {rejects} rejected, {false_alarms} false alarms");
    let correct = hits + rejects;
    println!(
        "  accuracy {:.1}%",
        100.0 * correct as f64 / held_out.examples().len() as f64
    );
}
