//! Enumerates the canonical feature table for the 24x24 window and prints
//! the per-type census plus a few sample geometries.
//!
//! Run with: `cargo run --example feature_census`

use haarboost::features::{FeatureTable, FeatureType};
use haarboost::WINDOW;

fn main() {
    let table = FeatureTable::enumerate(WINDOW);
    let census = table.census();

    println!("window {0}x{0}", WINDOW);
    for (ftype, count) in FeatureType::ALL.iter().zip(census.per_type) {
        let range = table.type_range(*ftype);
        println!(
            "  {:<22} {:>7} features, global indices {}..{}",
            ftype.name(),
            count,
            range.start,
            range.end
        );
    }
    println!("  {:<22} {:>7}", "total", census.total);

    println!("\nsample features:");
    for index in [0u32, 27_600, 55_200, 98_400, 141_600] {
        let f = table.get(index);
        println!(
            "  #{index}: {} at ({}, {}) extent {}x{}",
            f.ftype.name(),
            f.bounds.x,
            f.bounds.y,
            f.bounds.w,
            f.bounds.h
        );
    }
}
