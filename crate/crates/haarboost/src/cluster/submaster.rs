//! Sub-master role: relays weights downward unchanged, splits its feature
//! range over its workers, and reduces their per-round answers to one.

use std::net::SocketAddr;
use std::time::{Duration, Instant};

use super::{accept_children, bind, connect_retry, Child, LineConn, Message};
use crate::boosting::{Phase, RoundTiming, WeakClassifier};
use crate::engine::split_range;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct SubMasterConfig {
    /// The master's address.
    pub parent: String,
    /// Bind address for this node's own workers.
    pub listen: String,
    /// Worker count to wait for.
    pub expect: u32,
    pub timeout: Duration,
    pub node_id: String,
}

/// Runs the relay-and-reduce loop to job completion. Returns the per-round
/// reduce timings.
pub fn run_submaster(
    cfg: &SubMasterConfig,
    mut on_listening: impl FnMut(SocketAddr),
) -> Result<Vec<RoundTiming>> {
    if cfg.expect == 0 {
        return Err(Error::protocol(
            "submaster",
            &cfg.node_id,
            "need at least one worker",
        ));
    }
    let mut parent = connect_retry(&cfg.parent, cfg.timeout, "submaster", &cfg.node_id)?;
    parent.send(&Message::Hello {
        node_id: cfg.node_id.clone(),
        role: "submaster".to_string(),
    })?;
    let (listener, addr) = bind(&cfg.listen)?;
    on_listening(addr);
    let mut workers = accept_children(
        &listener,
        cfg.expect,
        cfg.timeout,
        "submaster",
        &cfg.node_id,
    )?;

    let result = serve(cfg, &mut parent, &mut workers);
    if let Err(e) = &result {
        // Fail-stop in both directions; peers may already be gone.
        let reason = e.to_string();
        let abort = Message::Error {
            node_id: cfg.node_id.clone(),
            reason,
        };
        if let Ok(line) = super::encode(&abort) {
            let _ = parent.send_line(&line);
            for w in workers.iter_mut() {
                let _ = w.conn.send_line(&line);
            }
        }
    }
    result
}

fn serve(
    cfg: &SubMasterConfig,
    parent: &mut LineConn,
    workers: &mut [Child],
) -> Result<Vec<RoundTiming>> {
    let fail = |reason: String| Error::protocol("submaster", &cfg.node_id, reason);

    for w in workers.iter() {
        if w.role != "worker" {
            return Err(fail(format!(
                "child {} announced role {:?}, expected \"worker\"",
                w.node_id, w.role
            )));
        }
    }

    // First message must be our range assignment; split it evenly and
    // forward everything else about the job untouched.
    match parent.recv().map_err(&fail)? {
        Message::Assign {
            dataset,
            dataset_hash,
            start,
            end,
            rounds,
            window,
        } => {
            if start >= end {
                return Err(fail(format!("empty feature range {start}..{end}")));
            }
            let sub_ranges = split_range(start..end, workers.len() as u32);
            for (w, range) in workers.iter_mut().zip(&sub_ranges) {
                w.conn.send(&Message::Assign {
                    dataset: dataset.clone(),
                    dataset_hash: dataset_hash.clone(),
                    start: range.start,
                    end: range.end,
                    rounds,
                    window,
                })?;
            }
        }
        other => return Err(fail(format!("expected ASSIGN, got {}", other.kind()))),
    }

    let mut timings = Vec::new();
    let mut round: u32 = 1;
    loop {
        let line = parent.recv_line().map_err(&fail)?;
        match super::decode(&line).map_err(&fail)? {
            Message::Weights { round: r, .. } => {
                if r != round {
                    return Err(fail(format!(
                        "round mismatch: WEIGHTS for round {r}, expected {round}"
                    )));
                }
                // Relay the raw line so every worker parses the exact bytes
                // the master wrote.
                for w in workers.iter_mut() {
                    w.conn.send_line(&line)?;
                }
                let reduce_started = Instant::now();
                let mut best: Option<(WeakClassifier, String)> = None;
                for w in workers.iter_mut() {
                    let reply = w.conn.recv_line().map_err(|reason| {
                        fail(format!("awaiting BEST from {}: {reason}", w.node_id))
                    })?;
                    match super::decode(&reply).map_err(&fail)? {
                        Message::Best {
                            round: br,
                            feature_index,
                            theta,
                            polarity,
                            error,
                        } => {
                            if br != r {
                                return Err(fail(format!(
                                    "stale round {br} in BEST from {} (current round {r})",
                                    w.node_id
                                )));
                            }
                            let wc = WeakClassifier {
                                feature_index,
                                theta,
                                polarity,
                                error,
                            };
                            if best.as_ref().map_or(true, |(b, _)| wc.beats(b)) {
                                best = Some((wc, reply));
                            }
                        }
                        Message::Error { node_id, reason } => {
                            return Err(fail(format!("worker {node_id} failed: {reason}")))
                        }
                        other => {
                            return Err(fail(format!(
                                "expected BEST from {}, got {}",
                                w.node_id,
                                other.kind()
                            )))
                        }
                    }
                }
                // Forward the winner's own BEST line verbatim.
                let (_, winner_line) = best.expect("at least one worker");
                parent.send_line(&winner_line)?;
                timings.push(RoundTiming {
                    round: r,
                    phase: Phase::Reduce,
                    seconds: reduce_started.elapsed().as_secs_f64(),
                });
                round += 1;
            }
            Message::Model { .. } => {
                for w in workers.iter_mut() {
                    w.conn.send_line(&line)?;
                }
                return Ok(timings);
            }
            Message::Error { node_id, reason } => {
                for w in workers.iter_mut() {
                    let _ = w.conn.send_line(&line);
                }
                return Err(fail(format!("job aborted by {node_id}: {reason}")));
            }
            other => return Err(fail(format!("unexpected {} mid-job", other.kind()))),
        }
    }
}
