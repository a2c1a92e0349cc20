//! Tabulates the predicted per-round time as nodes are added to a
//! sub-master, then reports the fan-out that minimizes it for several
//! feature allocations.
//!
//! Run with: `cargo run --example predict_scaling`

use haarboost::perfmodel::{
    optimal_fanout, predict_round_time, PredictiveModelInput, REF_COEFF_COMM, REF_COEFF_COMPUTE,
};

fn main() {
    // 43,200 features is one type's share of the 24x24 table — a realistic
    // per-sub-master allocation.
    let m = 43_200;
    println!("predicted round time, m = {m} features (reference coefficients)");
    println!("{:>5}  {:>9}", "nodes", "seconds");
    for n in 1..=10 {
        let t = predict_round_time(&PredictiveModelInput::reference(n, m));
        println!("{n:>5}  {t:>9.1}");
    }

    println!("\noptimal fan-out by allocation:");
    for m in [400u32, 5_000, 43_200, 162_336] {
        let (n_star, n_int) = optimal_fanout(m, REF_COEFF_COMM, REF_COEFF_COMPUTE);
        let t = predict_round_time(&PredictiveModelInput::reference(n_int, m));
        println!(
            "  m = {m:>7}: stationary point {n_star:>6.2}, best integer {n_int:>2} ({t:.2}s/round)"
        );
    }
}
