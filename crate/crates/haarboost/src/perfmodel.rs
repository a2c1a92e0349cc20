//! Predictive round-time model for the distributed scan, plus coefficient
//! fitting from measurements and speedup reporting for bench runs.

use crate::{Error, Result};

/// Published reference coefficients: seconds of communication overhead per
/// attached node, and seconds of scan time per feature.
pub const REF_COEFF_COMM: f64 = 0.2;
pub const REF_COEFF_COMPUTE: f64 = 0.5 / 1000.0;

/// Inputs to the round-time prediction for one sub-master: `n` nodes
/// attached to it, `m` features allocated to it (its workers scan `m/n`
/// each), and the two cluster-specific cost coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictiveModelInput {
    pub n: u32,
    pub m: u32,
    /// Seconds per attached node.
    pub coeff_comm: f64,
    /// Seconds per feature scanned.
    pub coeff_compute: f64,
}

impl PredictiveModelInput {
    /// Reference-coefficient input.
    pub fn reference(n: u32, m: u32) -> PredictiveModelInput {
        PredictiveModelInput {
            n,
            m,
            coeff_comm: REF_COEFF_COMM,
            coeff_compute: REF_COEFF_COMPUTE,
        }
    }
}

/// Predicted seconds for one boosting round at one sub-master:
/// `coeff_comm * n + coeff_compute * (m / n)`. Communication grows with
/// fan-out while per-worker scan time shrinks, so the sum has a single
/// interior minimum in `n`.
pub fn predict_round_time(input: &PredictiveModelInput) -> f64 {
    assert!(input.n >= 1 && input.m >= 1);
    assert!(input.coeff_comm > 0.0 && input.coeff_compute > 0.0);
    input.coeff_comm * input.n as f64 + input.coeff_compute * (input.m as f64 / input.n as f64)
}

/// Fan-out minimizing the predicted round time for `m` features:
/// the real stationary point `n* = sqrt(coeff_compute * m / coeff_comm)`
/// and the best integer `n >= 1` (ties go to the smaller n).
pub fn optimal_fanout(m: u32, coeff_comm: f64, coeff_compute: f64) -> (f64, u32) {
    assert!(m >= 1 && coeff_comm > 0.0 && coeff_compute > 0.0);
    let n_star = (coeff_compute * m as f64 / coeff_comm).sqrt();
    let time = |n: u32| {
        predict_round_time(&PredictiveModelInput {
            n,
            m,
            coeff_comm,
            coeff_compute,
        })
    };
    // Convexity: only the integers bracketing the stationary point matter.
    let lo = (n_star.floor() as u32).max(1);
    let hi = lo + 1;
    let n_int = if time(lo) <= time(hi) { lo } else { hi };
    (n_star, n_int)
}

/// One benchmark observation: a round of `m` features over `n` nodes took
/// `seconds`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub n: u32,
    pub m: u32,
    pub seconds: f64,
}

/// Least-squares fit of the two cost coefficients from measurements, via
/// the normal equations of `seconds = a * n + b * (m / n)`. Lets the
/// reference constants be recalibrated to a specific cluster.
pub fn fit_coefficients(measurements: &[Measurement]) -> Result<(f64, f64)> {
    let rank_err = || Error::PerfModel("insufficiently varied measurements".to_string());
    if measurements.len() < 2 {
        return Err(rank_err());
    }
    let (mut s11, mut s12, mut s22, mut sy1, mut sy2) = (0.0f64, 0.0, 0.0, 0.0, 0.0);
    for meas in measurements {
        assert!(meas.n >= 1 && meas.m >= 1);
        let x1 = meas.n as f64;
        let x2 = meas.m as f64 / meas.n as f64;
        s11 += x1 * x1;
        s12 += x1 * x2;
        s22 += x2 * x2;
        sy1 += x1 * meas.seconds;
        sy2 += x2 * meas.seconds;
    }
    let det = s11 * s22 - s12 * s12;
    // Relative threshold: collinear (n, m/n) columns make the system
    // singular no matter the units.
    if det.abs() <= 1e-12 * s11 * s22 {
        return Err(rank_err());
    }
    let a = (sy1 * s22 - sy2 * s12) / det;
    let b = (s11 * sy2 - s12 * sy1) / det;
    Ok((a, b))
}

/// One configuration's measured times in a bench sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchTiming {
    pub label: String,
    /// Seconds to load images and build integral images.
    pub upload_s: f64,
    /// Average seconds per boosting round.
    pub round_s: f64,
}

/// A bench-report row: measured times plus speedup relative to the
/// baseline configuration's round time.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupRecord {
    pub label: String,
    pub upload_s: f64,
    pub round_s: f64,
    pub speedup: f64,
}

/// Computes per-configuration speedups against `baseline`'s average round
/// time. Records keep the input order; full precision is retained here and
/// rounded only for display.
pub fn speedup_report(timings: &[BenchTiming], baseline: &str) -> Result<Vec<SpeedupRecord>> {
    let base = timings
        .iter()
        .find(|t| t.label == baseline)
        .ok_or_else(|| Error::PerfModel(format!("missing baseline {baseline:?}")))?;
    if !(base.round_s > 0.0) {
        return Err(Error::PerfModel(format!(
            "baseline {baseline:?} has no positive round time"
        )));
    }
    Ok(timings
        .iter()
        .map(|t| SpeedupRecord {
            label: t.label.clone(),
            upload_s: t.upload_s,
            round_s: t.round_s,
            speedup: base.round_s / t.round_s,
        })
        .collect())
}

/// Aligned text table (speedups shown at one decimal).
pub fn render_table(records: &[SpeedupRecord]) -> String {
    let label_width = records
        .iter()
        .map(|r| r.label.len())
        .chain(["configuration".len()])
        .max()
        .unwrap_or(0);
    let mut out = format!(
        "{:<label_width$}  {:>10}  {:>10}  {:>8}\n",
        "configuration", "upload_s", "round_s", "speedup"
    );
    for r in records {
        out.push_str(&format!(
            "{:<label_width$}  {:>10.3}  {:>10.3}  {:>8.1}\n",
            r.label, r.upload_s, r.round_s, r.speedup
        ));
    }
    out
}

/// CSV form, full precision.
pub fn to_csv(records: &[SpeedupRecord]) -> String {
    let mut out = String::from("label,upload_s,round_s,speedup\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.label, r.upload_s, r.round_s, r.speedup
        ));
    }
    out
}
