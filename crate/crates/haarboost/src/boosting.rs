//! Weighted decision stumps, the AdaBoost round loop, and the strong
//! classifier — the sequential reference that every parallel and
//! distributed execution strategy must match bit-for-bit.

use std::time::Instant;

use crate::dataset::{Dataset, DatasetStats, TrainingExample};
use crate::features::{FeatureTable, HaarFeature};
use crate::imaging::IntegralImage;
use crate::{Error, Result};

/// Weighted errors are clamped to `[FLOOR, 0.5 - FLOOR]` before computing
/// beta, so a perfect stump on separable data cannot produce an infinite
/// vote weight. The raw error is kept for reporting.
pub const ERROR_FLOOR: f64 = 1e-10;

/// Per-example training weights for round `round`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub w: Vec<f64>,
    pub round: u32,
}

/// The threshold fit of a decision stump on one feature's value column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StumpFit {
    pub theta: f64,
    /// +1 classifies values below theta as positive; -1 the values above.
    pub polarity: i8,
    /// Weighted training error of the fit.
    pub error: f64,
}

/// A fitted stump tied to its global feature index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakClassifier {
    pub feature_index: u32,
    pub theta: f64,
    pub polarity: i8,
    /// Raw (unclamped) weighted error at selection time.
    pub error: f64,
}

impl WeakClassifier {
    pub fn from_fit(feature_index: u32, fit: StumpFit) -> WeakClassifier {
        WeakClassifier {
            feature_index,
            theta: fit.theta,
            polarity: fit.polarity,
            error: fit.error,
        }
    }

    /// Lexicographic selection key; lower is better. Error comparison is an
    /// exact float comparison — combined with the index it is a total order,
    /// which is what makes every execution strategy pick the same winner.
    pub fn key(&self) -> (f64, u32) {
        (self.error, self.feature_index)
    }

    /// True when `self` beats `other` under the `(error, index)` rule.
    pub fn beats(&self, other: &WeakClassifier) -> bool {
        (self.error, self.feature_index) < (other.error, other.feature_index)
    }
}

/// The stump decision rule: 1 iff `p * value < p * theta`.
pub fn stump_decision(value: f64, theta: f64, polarity: i8) -> u8 {
    let fires = if polarity >= 0 {
        value < theta
    } else {
        value > theta
    };
    fires as u8
}

/// One boosting round's record: the winning stump plus its odds ratio and
/// vote weight, computed from the clamped error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundRecord {
    pub weak: WeakClassifier,
    pub beta: f64,
    pub alpha: f64,
}

/// One voting entry of a strong classifier: the full feature geometry (so a
/// stored model needs no feature table), the stump, and its vote weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VotingRound {
    pub feature: HaarFeature,
    pub theta: f64,
    pub polarity: i8,
    pub alpha: f64,
}

/// The boosted classifier: T voting rounds against the threshold
/// `0.5 * sum(alpha)`. A tied vote (exact equality) classifies as 1.
#[derive(Debug, Clone, PartialEq)]
pub struct StrongClassifier {
    pub window: u32,
    pub rounds: Vec<VotingRound>,
}

impl StrongClassifier {
    /// Weighted vote over all rounds.
    pub fn classify(&self, ii: &IntegralImage) -> u8 {
        let mut vote = 0.0f64;
        let mut total = 0.0f64;
        for r in &self.rounds {
            let value = r.feature.evaluate(ii) as f64;
            if stump_decision(value, r.theta, r.polarity) == 1 {
                vote += r.alpha;
            }
            total += r.alpha;
        }
        (vote >= 0.5 * total) as u8
    }

    /// Fraction of examples classified incorrectly.
    pub fn training_error(&self, examples: &[TrainingExample]) -> f64 {
        let wrong = examples
            .iter()
            .filter(|ex| self.classify(&ex.image) != ex.label)
            .count();
        wrong as f64 / examples.len() as f64
    }
}

/// Initial weights: `1/(2l)` for each positive, `1/(2m)` for each negative,
/// in example order.
pub fn init_weights(stats: DatasetStats, labels: &[u8]) -> WeightVector {
    let wp = 1.0 / (2.0 * stats.positives as f64);
    let wn = 1.0 / (2.0 * stats.negatives as f64);
    WeightVector {
        w: labels
            .iter()
            .map(|&y| if y == 1 { wp } else { wn })
            .collect(),
        round: 1,
    }
}

/// Rescales weights into a probability distribution.
pub fn normalize(mut w: WeightVector) -> Result<WeightVector> {
    let total: f64 = w.w.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::WeightCollapse);
    }
    for wi in &mut w.w {
        *wi /= total;
    }
    Ok(w)
}

/// Clamped error and the resulting odds ratio `beta = e / (1 - e)`.
pub fn beta_for(error: f64) -> f64 {
    let e = error.clamp(ERROR_FLOOR, 0.5 - ERROR_FLOOR);
    e / (1.0 - e)
}

/// Vote weight `alpha = ln(1 / beta)`.
pub fn alpha_for(beta: f64) -> f64 {
    (1.0 / beta).ln()
}

/// Fits the optimal decision stump for one feature's values by
/// sort-and-scan.
///
/// Candidate thresholds are the midpoints between adjacent distinct sorted
/// values, plus one below the minimum and one above the maximum. At each
/// candidate the error for both polarities comes from prefix weight sums;
/// the best (error, then smallest theta, then polarity +1) wins. With all
/// values identical only the two outer candidates exist, so the result is
/// the better constant classifier.
///
/// Determinism note: the sort key is `(value, example index)` and all sums
/// accumulate in sorted order, so the result is a pure function of the
/// inputs — identical on every node of a cluster.
pub fn train_stump(values: &[f64], labels: &[u8], weights: &[f64]) -> StumpFit {
    let n = values.len();
    debug_assert!(n >= 2, "need at least two examples");
    debug_assert_eq!(labels.len(), n);
    debug_assert_eq!(weights.len(), n);

    let mut order: Vec<u32> = (0..n as u32).collect();
    order.sort_unstable_by(|&a, &b| {
        values[a as usize]
            .total_cmp(&values[b as usize])
            .then(a.cmp(&b))
    });

    let mut t_pos = 0.0f64;
    let mut t_neg = 0.0f64;
    for &i in &order {
        if labels[i as usize] == 1 {
            t_pos += weights[i as usize];
        } else {
            t_neg += weights[i as usize];
        }
    }

    let mut s_pos = 0.0f64;
    let mut s_neg = 0.0f64;
    let mut best: Option<StumpFit> = None;
    for k in 0..=n {
        let at_boundary = k == 0
            || k == n
            || values[order[k - 1] as usize] != values[order[k] as usize];
        if at_boundary {
            let theta = if k == 0 {
                values[order[0] as usize] - 1.0
            } else if k == n {
                values[order[n - 1] as usize] + 1.0
            } else {
                (values[order[k - 1] as usize] + values[order[k] as usize]) / 2.0
            };
            // polarity +1 fires below theta: wrong on positives above and
            // negatives below. polarity -1 is the mirror image.
            let err_plus = (t_pos - s_pos) + s_neg;
            let err_minus = s_pos + (t_neg - s_neg);
            for (error, polarity) in [(err_plus, 1i8), (err_minus, -1i8)] {
                // Strict less-than: candidates arrive in ascending theta
                // with +1 first, so ties keep the smallest theta, then +1.
                if best.map_or(true, |b| error < b.error) {
                    best = Some(StumpFit {
                        theta,
                        polarity,
                        error,
                    });
                }
            }
        }
        if k < n {
            let i = order[k] as usize;
            if labels[i] == 1 {
                s_pos += weights[i];
            } else {
                s_neg += weights[i];
            }
        }
    }
    best.expect("at least the outer candidates exist")
}

/// Scans a contiguous feature range and returns the winner under the
/// `(error, global_index)` rule. Pure given immutable inputs — this is the
/// unit of work handed to threads and cluster workers.
pub fn best_over_range(
    table: &FeatureTable,
    range: std::ops::Range<u32>,
    examples: &[TrainingExample],
    weights: &[f64],
) -> WeakClassifier {
    assert!(!range.is_empty(), "feature range must be non-empty");
    assert!(range.end as usize <= table.features().len());
    let labels: Vec<u8> = examples.iter().map(|e| e.label).collect();
    let mut values = vec![0.0f64; examples.len()];
    let mut best: Option<WeakClassifier> = None;
    for index in range {
        let feature = table.get(index);
        for (slot, ex) in values.iter_mut().zip(examples) {
            *slot = feature.evaluate(&ex.image) as f64;
        }
        let fit = train_stump(&values, &labels, weights);
        // Ascending scan + strict comparison keeps the lowest index on ties.
        if best.map_or(true, |b| (fit.error, index) < (b.error, b.feature_index)) {
            best = Some(WeakClassifier::from_fit(index, fit));
        }
    }
    best.expect("range is non-empty")
}

/// Applies the boosting reweighting `w_i <- w_i * beta^(1 - e_i)` where
/// `e_i = 0` iff example `i` was classified correctly — i.e. correct
/// examples shrink by beta, mistakes keep their weight. The output is not
/// normalized; the next round's normalization step does that.
pub fn update_weights(
    mut w: WeightVector,
    weak: &WeakClassifier,
    table: &FeatureTable,
    examples: &[TrainingExample],
) -> Result<WeightVector> {
    if !(weak.error < 0.5) {
        return Err(Error::WeakLearner {
            round: w.round,
            error: weak.error,
        });
    }
    let beta = beta_for(weak.error);
    let feature = table.get(weak.feature_index);
    for (wi, ex) in w.w.iter_mut().zip(examples) {
        let value = feature.evaluate(&ex.image) as f64;
        if stump_decision(value, weak.theta, weak.polarity) == ex.label {
            *wi *= beta;
        }
    }
    w.round += 1;
    Ok(w)
}

/// Phases of one boosting round. `Reduce` only appears in cluster runs and
/// measures the await-and-merge portion nested inside `Scan`, so a round's
/// wall time is the sum of the other three phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Normalize,
    Scan,
    Reduce,
    Update,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Normalize => "normalize",
            Phase::Scan => "scan",
            Phase::Reduce => "reduce",
            Phase::Update => "update",
        }
    }
}

/// One timing record emitted during training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundTiming {
    pub round: u32,
    pub phase: Phase,
    pub seconds: f64,
}

/// Everything the trainer saw for one round, passed to progress callbacks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundReport {
    pub round: u32,
    pub record: RoundRecord,
    pub seconds: f64,
}

/// Everything a finished training run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub classifier: StrongClassifier,
    pub records: Vec<RoundRecord>,
    pub timings: Vec<RoundTiming>,
}

impl TrainOutcome {
    /// Wall time of one round (normalize + scan + update).
    pub fn round_seconds(&self, round: u32) -> f64 {
        self.timings
            .iter()
            .filter(|t| t.round == round && t.phase != Phase::Reduce)
            .map(|t| t.seconds)
            .sum()
    }

    /// Mean round wall time across the run.
    pub fn avg_round_seconds(&self) -> f64 {
        let rounds = self.records.len() as f64;
        self.records
            .iter()
            .enumerate()
            .map(|(i, _)| self.round_seconds(i as u32 + 1))
            .sum::<f64>()
            / rounds
    }
}

/// Per-round inputs handed to an execution strategy.
pub struct RoundCtx<'a> {
    pub round: u32,
    pub weights: &'a [f64],
    pub table: &'a FeatureTable,
    pub examples: &'a [TrainingExample],
    /// Number of leading features in play (a prefix of the canonical
    /// enumeration; equal to the full census when nothing is restricted).
    pub limit: u32,
}

/// An execution strategy: given the round's weights, produce the globally
/// best weak classifier over the features in play. Implementations must be
/// pure functions of `(weights, table prefix, examples)` — the trainer
/// relies on that for cross-strategy bit-exactness.
pub trait RoundExecutor {
    fn best_for_round(&mut self, ctx: &RoundCtx<'_>) -> Result<WeakClassifier>;

    /// Extra timing records gathered during the last round (e.g. cluster
    /// reduce time). Drained once per round by the trainer.
    fn extra_timings(&mut self) -> Vec<RoundTiming> {
        Vec::new()
    }
}

/// The reference strategy: one full in-process scan.
#[derive(Debug, Default)]
pub struct SequentialExecutor;

impl RoundExecutor for SequentialExecutor {
    fn best_for_round(&mut self, ctx: &RoundCtx<'_>) -> Result<WeakClassifier> {
        Ok(best_over_range(ctx.table, 0..ctx.limit, ctx.examples, ctx.weights))
    }
}

/// Runs the boosting loop: per round, normalize weights, let the executor
/// find the best stump, record `(beta, alpha)`, reweight. `on_round` fires
/// after each round with the record and the round's wall time — `|_| ()` if
/// no progress output is wanted.
pub fn train(
    dataset: &Dataset,
    table: &FeatureTable,
    limit: u32,
    rounds: u32,
    executor: &mut dyn RoundExecutor,
    mut on_round: impl FnMut(&RoundReport),
) -> Result<TrainOutcome> {
    assert!(rounds >= 1, "at least one round");
    assert!(
        limit >= 1 && limit as usize <= table.features().len(),
        "feature limit out of range"
    );
    let examples = dataset.examples();
    let labels: Vec<u8> = examples.iter().map(|e| e.label).collect();
    let mut w = init_weights(dataset.stats(), &labels);
    let mut records = Vec::with_capacity(rounds as usize);
    let mut voting = Vec::with_capacity(rounds as usize);
    let mut timings = Vec::new();
    for t in 1..=rounds {
        let round_started = Instant::now();

        let started = Instant::now();
        w = normalize(w).map_err(|e| at_round(t, e))?;
        timings.push(RoundTiming {
            round: t,
            phase: Phase::Normalize,
            seconds: started.elapsed().as_secs_f64(),
        });

        let started = Instant::now();
        let ctx = RoundCtx {
            round: t,
            weights: &w.w,
            table,
            examples,
            limit,
        };
        let weak = executor
            .best_for_round(&ctx)
            .map_err(|e| at_round(t, e))?;
        timings.push(RoundTiming {
            round: t,
            phase: Phase::Scan,
            seconds: started.elapsed().as_secs_f64(),
        });
        timings.extend(executor.extra_timings());

        let started = Instant::now();
        w = update_weights(w, &weak, table, examples).map_err(|e| at_round(t, e))?;
        timings.push(RoundTiming {
            round: t,
            phase: Phase::Update,
            seconds: started.elapsed().as_secs_f64(),
        });

        let beta = beta_for(weak.error);
        let alpha = alpha_for(beta);
        let record = RoundRecord { weak, beta, alpha };
        records.push(record);
        voting.push(VotingRound {
            feature: *table.get(weak.feature_index),
            theta: weak.theta,
            polarity: weak.polarity,
            alpha,
        });
        on_round(&RoundReport {
            round: t,
            record,
            seconds: round_started.elapsed().as_secs_f64(),
        });
    }
    Ok(TrainOutcome {
        classifier: StrongClassifier {
            window: table.window(),
            rounds: voting,
        },
        records,
        timings,
    })
}

fn at_round(round: u32, e: Error) -> Error {
    match e {
        // Already carries its round.
        Error::WeakLearner { .. } => e,
        other => Error::Round {
            round,
            source: Box::new(other),
        },
    }
}
