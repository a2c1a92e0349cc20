//! In-process parallel argmin over feature groups: partition the feature
//! range, scan groups on a bounded pool of threads, merge after a barrier.
//! Output is bit-identical to a sequential scan by construction.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::boosting::{best_over_range, RoundCtx, RoundExecutor, WeakClassifier};
use crate::dataset::TrainingExample;
use crate::features::{FeatureCensus, FeatureTable};
use crate::{Error, Result};

/// How to split the feature index space into contiguous groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionScheme {
    /// Five groups, one per feature type, in canonical type order. Only
    /// valid when every feature is in play.
    ByType,
    /// `k` groups with sizes differing by at most one, earlier groups
    /// larger. Works for any prefix of the feature space.
    ByChunk(u32),
}

/// Disjoint contiguous ranges covering `[0, total)`, each non-empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeaturePartition {
    pub groups: Vec<std::ops::Range<u32>>,
    pub scheme: PartitionScheme,
}

/// Splits `total` features under the given scheme. `census` supplies the
/// per-type boundaries for [`PartitionScheme::ByType`], which requires
/// `total` to cover the whole table (a truncated prefix has no meaningful
/// type boundaries — use `ByChunk` for those).
pub fn partition(
    total: u32,
    scheme: PartitionScheme,
    census: &FeatureCensus,
) -> Result<FeaturePartition> {
    if total == 0 {
        return Err(Error::InvalidPartition("no features to partition".into()));
    }
    let groups = match scheme {
        PartitionScheme::ByType => {
            if total != census.total {
                return Err(Error::InvalidPartition(format!(
                    "by-type grouping needs the full feature set ({} features), got {total}",
                    census.total
                )));
            }
            let mut start = 0u32;
            census
                .per_type
                .iter()
                .map(|&count| {
                    let range = start..start + count;
                    start += count;
                    range
                })
                .collect()
        }
        PartitionScheme::ByChunk(k) => {
            if k == 0 || k > total {
                return Err(Error::InvalidPartition(format!(
                    "chunk count {k} not in 1..={total}"
                )));
            }
            split_range(0..total, k)
        }
    };
    Ok(FeaturePartition { groups, scheme })
}

impl FeaturePartition {
    pub fn total(&self) -> u32 {
        self.groups.iter().map(|g| g.end - g.start).sum()
    }
}

/// Splits a contiguous range into `k` contiguous pieces with sizes
/// differing by at most one, earlier pieces larger. `k` is capped at the
/// range length so every piece is non-empty.
pub fn split_range(range: std::ops::Range<u32>, k: u32) -> Vec<std::ops::Range<u32>> {
    let total = range.end - range.start;
    assert!(total >= 1, "cannot split an empty range");
    let k = k.clamp(1, total);
    let base = total / k;
    let remainder = total % k;
    let mut start = range.start;
    (0..k)
        .map(|i| {
            let size = base + (i < remainder) as u32;
            let piece = start..start + size;
            start += size;
            piece
        })
        .collect()
}

/// Scans every group (on up to `worker_budget` threads) and merges the
/// group winners by the `(error, global_index)` rule.
///
/// Workers share the dataset and weights read-only and write only their own
/// result slot; the merge happens after all of them finish, in group order.
/// The winner is therefore a pure function of the inputs — scheduling,
/// budget, and partition shape cannot change it.
pub fn parallel_best(
    part: &FeaturePartition,
    table: &FeatureTable,
    examples: &[TrainingExample],
    weights: &[f64],
    worker_budget: usize,
) -> WeakClassifier {
    assert!(worker_budget >= 1, "need at least one worker");
    let n_groups = part.groups.len();
    let mut results: Mutex<Vec<Option<WeakClassifier>>> = Mutex::new(vec![None; n_groups]);
    let threads = worker_budget.min(n_groups);
    if threads == 1 {
        let slots = results.get_mut().unwrap();
        for (i, group) in part.groups.iter().enumerate() {
            slots[i] = Some(best_over_range(table, group.clone(), examples, weights));
        }
    } else {
        let next = AtomicUsize::new(0);
        std::thread::scope(|s| {
            for _ in 0..threads {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= n_groups {
                        break;
                    }
                    let wc =
                        best_over_range(table, part.groups[i].clone(), examples, weights);
                    results.lock().unwrap()[i] = Some(wc);
                });
            }
        });
    }
    let slots = results.into_inner().unwrap();
    let mut best: Option<WeakClassifier> = None;
    for wc in slots {
        let wc = wc.expect("every group produced a result");
        if best.map_or(true, |b| wc.beats(&b)) {
            best = Some(wc);
        }
    }
    best.expect("partition has at least one group")
}

/// Multi-core execution strategy for the trainer: by-type groups when the
/// whole table is in play, balanced chunks otherwise.
#[derive(Debug, Clone, Copy)]
pub struct ParallelExecutor {
    pub worker_budget: usize,
}

impl ParallelExecutor {
    pub fn new(worker_budget: usize) -> ParallelExecutor {
        assert!(worker_budget >= 1);
        ParallelExecutor { worker_budget }
    }
}

impl RoundExecutor for ParallelExecutor {
    fn best_for_round(&mut self, ctx: &RoundCtx<'_>) -> Result<WeakClassifier> {
        let census = ctx.table.census();
        let scheme = if ctx.limit == census.total {
            PartitionScheme::ByType
        } else {
            PartitionScheme::ByChunk((self.worker_budget as u32).min(ctx.limit))
        };
        let part = partition(ctx.limit, scheme, &census)?;
        Ok(parallel_best(
            &part,
            ctx.table,
            ctx.examples,
            ctx.weights,
            self.worker_budget,
        ))
    }
}
