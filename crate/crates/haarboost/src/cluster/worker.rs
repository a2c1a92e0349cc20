//! Worker role: loads the dataset locally, verifies it matches the job's
//! content hash, and answers each round's weights with the best stump over
//! its assigned feature range.

use std::time::{Duration, Instant};

use super::{connect_retry, LineConn, Message};
use crate::boosting::{Phase, RoundTiming, WeakClassifier};
use crate::dataset::{load, Dataset};
use crate::engine::{parallel_best, split_range, FeaturePartition, PartitionScheme};
use crate::features::FeatureTable;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct WorkerConfig {
    /// The parent's address (master or sub-master).
    pub parent: String,
    pub timeout: Duration,
    pub node_id: String,
    /// Local scan concurrency (the in-process engine's worker budget).
    pub workers: u32,
}

/// Runs the scan loop to job completion. Returns per-round scan timings.
pub fn run_worker(cfg: &WorkerConfig) -> Result<Vec<RoundTiming>> {
    let mut parent = connect_retry(&cfg.parent, cfg.timeout, "worker", &cfg.node_id)?;
    parent.send(&Message::Hello {
        node_id: cfg.node_id.clone(),
        role: "worker".to_string(),
    })?;
    let result = serve(cfg, &mut parent);
    if let Err(e) = &result {
        let _ = parent.send(&Message::Error {
            node_id: cfg.node_id.clone(),
            reason: e.to_string(),
        });
    }
    result
}

fn serve(cfg: &WorkerConfig, parent: &mut LineConn) -> Result<Vec<RoundTiming>> {
    let fail = |reason: String| Error::protocol("worker", &cfg.node_id, reason);

    let (dataset, range) = match parent.recv().map_err(&fail)? {
        Message::Assign {
            dataset,
            dataset_hash,
            start,
            end,
            rounds: _,
            window,
        } => {
            let loaded: Dataset = load(&dataset)?;
            if loaded.content_hash() != dataset_hash {
                return Err(fail(format!(
                    "dataset hash mismatch: job expects {dataset_hash}, local data is {}",
                    loaded.content_hash()
                )));
            }
            if window != crate::WINDOW {
                return Err(fail(format!(
                    "unsupported window {window} (this build scans {})",
                    crate::WINDOW
                )));
            }
            if start >= end {
                return Err(fail(format!("empty feature range {start}..{end}")));
            }
            (loaded, start..end)
        }
        other => return Err(fail(format!("expected ASSIGN, got {}", other.kind()))),
    };

    let table = FeatureTable::enumerate(crate::WINDOW);
    if range.end > table.census().total {
        return Err(fail(format!(
            "feature range {}..{} exceeds the {}-feature table",
            range.start,
            range.end,
            table.census().total
        )));
    }
    let budget = cfg.workers.max(1);
    let part = FeaturePartition {
        groups: split_range(range.clone(), budget),
        scheme: PartitionScheme::ByChunk(budget),
    };

    let mut timings = Vec::new();
    let mut round: u32 = 1;
    loop {
        match parent.recv().map_err(&fail)? {
            Message::Weights { round: r, weights } => {
                if r != round {
                    return Err(fail(format!(
                        "round mismatch: WEIGHTS for round {r}, expected {round}"
                    )));
                }
                if weights.len() != dataset.examples().len() {
                    return Err(fail(format!(
                        "weight count {} does not match {} examples",
                        weights.len(),
                        dataset.examples().len()
                    )));
                }
                let scan_started = Instant::now();
                let wc: WeakClassifier = parallel_best(
                    &part,
                    &table,
                    dataset.examples(),
                    &weights,
                    budget as usize,
                );
                timings.push(RoundTiming {
                    round: r,
                    phase: Phase::Scan,
                    seconds: scan_started.elapsed().as_secs_f64(),
                });
                parent.send(&Message::Best {
                    round: r,
                    feature_index: wc.feature_index,
                    theta: wc.theta,
                    polarity: wc.polarity,
                    error: wc.error,
                })?;
                round += 1;
            }
            Message::Model { .. } => return Ok(timings),
            Message::Error { node_id, reason } => {
                return Err(fail(format!("job aborted by {node_id}: {reason}")))
            }
            other => return Err(fail(format!("unexpected {} mid-job", other.kind()))),
        }
    }
}
