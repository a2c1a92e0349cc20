//! Master role: owns the dataset and the boosting loop, farms each round's
//! scan out to its children, and reduces their answers.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use super::{accept_children, bind, encode, Child, Message};
use crate::boosting::{
    train, Phase, RoundCtx, RoundExecutor, RoundReport, RoundTiming, TrainOutcome,
    WeakClassifier,
};
use crate::dataset::{load, DatasetRef};
use crate::engine::{partition, PartitionScheme};
use crate::features::FeatureTable;
use crate::{model, Error, Result, WINDOW};

#[derive(Debug, Clone)]
pub struct MasterConfig {
    /// Bind address; port 0 picks a free port (reported via the listening
    /// callback).
    pub listen: String,
    /// Number of direct children (workers in a flat job, sub-masters in a
    /// two-level one — the master treats both alike).
    pub expect: u32,
    pub dataset: DatasetRef,
    pub rounds: u32,
    /// Leading features in play; `None` means the full table.
    pub limit: Option<u32>,
    pub timeout: Duration,
    pub node_id: String,
    /// Where to write the model file, if anywhere.
    pub out: Option<PathBuf>,
}

/// Per-round reduce over the children: broadcast this round's weights, then
/// take the lexicographic-min `(error, feature_index)` of their answers.
struct FanOut<'a> {
    children: &'a mut [Child],
    node_id: &'a str,
    last_reduce: Option<RoundTiming>,
}

impl RoundExecutor for FanOut<'_> {
    fn best_for_round(&mut self, ctx: &RoundCtx<'_>) -> Result<WeakClassifier> {
        // Encode once; every child sees byte-identical weights.
        let line = encode(&Message::Weights {
            round: ctx.round,
            weights: ctx.weights.to_vec(),
        })?;
        for child in self.children.iter_mut() {
            child.conn.send_line(&line)?;
        }
        let reduce_started = Instant::now();
        let mut best: Option<WeakClassifier> = None;
        for child in self.children.iter_mut() {
            let msg = child.conn.recv().map_err(|reason| {
                Error::protocol(
                    "master",
                    self.node_id,
                    format!("awaiting BEST from {}: {reason}", child.node_id),
                )
            })?;
            match msg {
                Message::Best {
                    round,
                    feature_index,
                    theta,
                    polarity,
                    error,
                } => {
                    if round != ctx.round {
                        return Err(Error::protocol(
                            "master",
                            self.node_id,
                            format!(
                                "stale round {round} in BEST from {} (current round {})",
                                child.node_id, ctx.round
                            ),
                        ));
                    }
                    let wc = WeakClassifier {
                        feature_index,
                        theta,
                        polarity,
                        error,
                    };
                    if best.map_or(true, |b| wc.beats(&b)) {
                        best = Some(wc);
                    }
                }
                Message::Error { node_id, reason } => {
                    return Err(Error::protocol(
                        "master",
                        self.node_id,
                        format!("child {node_id} failed: {reason}"),
                    ))
                }
                other => {
                    return Err(Error::protocol(
                        "master",
                        self.node_id,
                        format!("expected BEST from {}, got {}", child.node_id, other.kind()),
                    ))
                }
            }
        }
        self.last_reduce = Some(RoundTiming {
            round: ctx.round,
            phase: Phase::Reduce,
            seconds: reduce_started.elapsed().as_secs_f64(),
        });
        Ok(best.expect("at least one child"))
    }

    fn extra_timings(&mut self) -> Vec<RoundTiming> {
        self.last_reduce.take().into_iter().collect()
    }
}

/// Runs a whole training job as the master. `on_listening` fires once the
/// listener is bound (before children are awaited); `on_round` after each
/// completed round.
pub fn run_master(
    cfg: &MasterConfig,
    mut on_listening: impl FnMut(SocketAddr),
    on_round: impl FnMut(&RoundReport),
) -> Result<TrainOutcome> {
    if cfg.expect == 0 {
        return Err(Error::protocol(
            "master",
            &cfg.node_id,
            "need at least one child",
        ));
    }
    if cfg.rounds == 0 {
        return Err(Error::protocol("master", &cfg.node_id, "need rounds >= 1"));
    }
    let (listener, addr) = bind(&cfg.listen)?;
    on_listening(addr);
    let mut children =
        accept_children(&listener, cfg.expect, cfg.timeout, "master", &cfg.node_id)?;

    let dataset = load(&cfg.dataset)?;
    let table = FeatureTable::enumerate(WINDOW);
    let census = table.census();
    let limit = cfg.limit.unwrap_or(census.total);
    if limit == 0 || limit > census.total {
        return Err(Error::InvalidPartition(format!(
            "feature limit {limit} not in 1..={}",
            census.total
        )));
    }

    let outcome = (|| -> Result<TrainOutcome> {
        // Assignment mirrors the canonical five-way type split whenever the
        // job shape allows it; any other shape gets balanced chunks.
        let scheme = if children.len() == 5 && limit == census.total {
            PartitionScheme::ByType
        } else {
            PartitionScheme::ByChunk(children.len() as u32)
        };
        let ranges = partition(limit, scheme, &census)?.groups;
        for (child, range) in children.iter_mut().zip(&ranges) {
            child.conn.send(&Message::Assign {
                dataset: cfg.dataset.clone(),
                dataset_hash: dataset.content_hash().to_string(),
                start: range.start,
                end: range.end,
                rounds: cfg.rounds,
                window: WINDOW,
            })?;
        }

        let mut fan_out = FanOut {
            children: &mut children,
            node_id: &cfg.node_id,
            last_reduce: None,
        };
        let outcome = train(&dataset, &table, limit, cfg.rounds, &mut fan_out, on_round)?;

        let model_json = model::to_json(&outcome.classifier)?;
        let done = encode(&Message::Model {
            model: model_json.trim_end().to_string(),
        })?;
        for child in children.iter_mut() {
            child.conn.send_line(&done)?;
        }
        if let Some(out) = &cfg.out {
            std::fs::write(out, &model_json)?;
        }
        Ok(outcome)
    })();

    if let Err(e) = &outcome {
        // Fail-stop: tell every reachable child the job is dead.
        let abort = Message::Error {
            node_id: cfg.node_id.clone(),
            reason: e.to_string(),
        };
        if let Ok(line) = encode(&abort) {
            for child in children.iter_mut() {
                let _ = child.conn.send_line(&line);
            }
        }
    }
    outcome
}
