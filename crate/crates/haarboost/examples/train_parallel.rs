//! Trains the same job sequentially and with the multi-core engine, then
//! proves the two models agree byte for byte.
//!
//! Run with: `cargo run --example train_parallel`

use haarboost::boosting::{train, SequentialExecutor};
use haarboost::dataset::synth;
use haarboost::engine::ParallelExecutor;
use haarboost::features::FeatureTable;
use haarboost::{model, WINDOW};

fn main() {
    let dataset = synth(7, 50, 50);
    let table = FeatureTable::enumerate(WINDOW);
    // A fixed prefix of the table keeps the example quick; the agreement
    // holds for any prefix, budget, and partition shape.
    let limit = 20_000;
    let rounds = 3;

    let seq = train(&dataset, &table, limit, rounds, &mut SequentialExecutor, |_| ()).unwrap();
    println!("sequential: {:.2}s/round", seq.avg_round_seconds());

    let budget = std::thread::available_parallelism().map_or(2, |n| n.get());
    let mut exec = ParallelExecutor::new(budget);
    let par = train(&dataset, &table, limit, rounds, &mut exec, |_| ()).unwrap();
    println!("parallel ({budget} workers): {:.2}s/round", par.avg_round_seconds());

    let a = model::to_json(&seq.classifier).unwrap();
    let b = model::to_json(&par.classifier).unwrap();
    assert_eq!(a, b);
    println!("models are byte-identical ({} bytes of JSON)", a.len());
    for (i, (s, p)) in seq.records.iter().zip(&par.records).enumerate() {
        assert_eq!(s, p);
        println!(
            "round {}: both picked feature #{} (error {:.6})",
            i + 1,
            s.weak.feature_index,
            s.weak.error
        );
    }
}
