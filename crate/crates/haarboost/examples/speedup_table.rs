//! Builds a speedup report from one recorded deployment sweep — the same
//! trainer measured sequentially, multi-core, and on one- and two-level
//! clusters — and renders it as an aligned table and as CSV.
//!
//! Run with: `cargo run --example speedup_table`

use haarboost::perfmodel::{render_table, speedup_report, to_csv, BenchTiming};

fn main() {
    // Measured upload and average-round times from a six-configuration
    // deployment of this trainer (seconds).
    let rows = [
        ("seq-1pc", 1780.6, 456.5),
        ("par-1pc", 330.7, 116.1),
        ("one-level-6pc", 92.7, 24.6),
        ("two-level-21pc", 30.3, 6.4),
        ("two-level-26pc", 35.4, 5.2),
        ("two-level-31pc", 31.7, 4.8),
    ];
    let timings: Vec<BenchTiming> = rows
        .iter()
        .map(|&(label, upload_s, round_s)| BenchTiming {
            label: label.to_string(),
            upload_s,
            round_s,
        })
        .collect();

    let report = speedup_report(&timings, "seq-1pc").expect("baseline present");
    print!("{}", render_table(&report));
    println!("\ncsv form:\n{}", to_csv(&report).trim_end());
}
