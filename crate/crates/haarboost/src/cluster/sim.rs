//! Local multi-process cluster: spawns every role as a child process of the
//! role binary on loopback sockets, runs a full job, and collects the model
//! plus per-node timings. A desk-scale stand-in for a real machine room.

use std::io::{BufRead, BufReader};
use std::path::PathBuf;
use std::process::{Child as Proc, Command, Stdio};
use std::sync::mpsc::{channel, Receiver};
use std::time::{Duration, Instant};

use super::Topology;
use crate::boosting::{Phase, RoundTiming, StrongClassifier};
use crate::dataset::DatasetRef;
use crate::{model, Error, Result};

#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Path to this crate's executable (roles are its subcommands).
    pub binary: PathBuf,
    pub topology: Topology,
    pub dataset: DatasetRef,
    pub rounds: u32,
    /// Leading features in play; `None` means the full table.
    pub limit: Option<u32>,
    /// Per-worker local scan concurrency.
    pub worker_budget: u32,
    pub timeout: Duration,
}

/// One node's timing record.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeTiming {
    pub node_id: String,
    pub timing: RoundTiming,
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub classifier: StrongClassifier,
    /// The model file exactly as the master wrote it.
    pub model_json: String,
    pub timings: Vec<NodeTiming>,
}

/// A spawned role process plus a background reader draining its stdout.
struct Node {
    node_id: String,
    proc: Proc,
    lines: Receiver<String>,
    collected: Vec<String>,
}

impl Node {
    fn spawn(node_id: &str, mut cmd: Command) -> Result<Node> {
        cmd.stdout(Stdio::piped()).stderr(Stdio::piped());
        let mut proc = cmd.spawn()?;
        let stdout = proc.stdout.take().expect("stdout is piped");
        let (tx, rx) = channel();
        // Reader thread ends at EOF; the channel closing signals that.
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                match line {
                    Ok(l) => {
                        if tx.send(l).is_err() {
                            break;
                        }
                    }
                    Err(_) => break,
                }
            }
        });
        Ok(Node {
            node_id: node_id.to_string(),
            proc,
            lines: rx,
            collected: Vec::new(),
        })
    }

    /// Waits for the `LISTENING <addr>` announcement.
    fn await_listening(&mut self, timeout: Duration) -> Result<String> {
        let deadline = Instant::now() + timeout;
        loop {
            let remaining = deadline
                .checked_duration_since(Instant::now())
                .unwrap_or(Duration::ZERO);
            match self.lines.recv_timeout(remaining) {
                Ok(line) => {
                    if let Some(addr) = line.strip_prefix("LISTENING ") {
                        let addr = addr.trim().to_string();
                        self.collected.push(line);
                        return Ok(addr);
                    }
                    self.collected.push(line);
                }
                Err(_) => {
                    return Err(Error::protocol(
                        "simulator",
                        &self.node_id,
                        "node never announced its listening address",
                    ))
                }
            }
        }
    }

    fn drain(&mut self) {
        while let Ok(line) = self.lines.try_recv() {
            self.collected.push(line);
        }
    }

    /// Waits for exit within the deadline; kills on overrun.
    fn finish(&mut self, deadline: Instant) -> Result<()> {
        loop {
            if let Some(status) = self.proc.try_wait()? {
                self.drain();
                if status.success() {
                    return Ok(());
                }
                let mut stderr = String::new();
                if let Some(mut pipe) = self.proc.stderr.take() {
                    use std::io::Read;
                    let _ = pipe.read_to_string(&mut stderr);
                }
                return Err(Error::protocol(
                    "simulator",
                    &self.node_id,
                    format!("node exited with {status}: {}", stderr.trim()),
                ));
            }
            if Instant::now() >= deadline {
                let _ = self.proc.kill();
                let _ = self.proc.wait();
                return Err(Error::protocol(
                    "simulator",
                    &self.node_id,
                    "node did not exit before the deadline",
                ));
            }
            std::thread::sleep(Duration::from_millis(10));
        }
    }
}

impl Drop for Node {
    fn drop(&mut self) {
        // Fail-stop hygiene: never leave orphan processes behind.
        if self.proc.try_wait().map(|s| s.is_none()).unwrap_or(false) {
            let _ = self.proc.kill();
            let _ = self.proc.wait();
        }
    }
}

/// Runs one full training job as local processes and returns the model the
/// master wrote plus every node's TIMING records.
pub fn simulate_local(cfg: &SimConfig) -> Result<SimOutcome> {
    let (expect, fanout) = match cfg.topology {
        Topology::OneLevel { workers } => (workers, 0),
        Topology::TwoLevel { submasters, fanout } => (submasters, fanout),
    };
    if expect == 0 || (matches!(cfg.topology, Topology::TwoLevel { .. }) && fanout == 0) {
        return Err(Error::protocol(
            "simulator",
            "sim",
            "topology needs at least one node per level",
        ));
    }

    let outdir = tempfile::tempdir()?;
    let model_path = outdir.path().join("model.json");
    let timeout_s = format!("{}", cfg.timeout.as_secs_f64());
    let data = cfg.dataset.to_string();

    let mut master_cmd = Command::new(&cfg.binary);
    master_cmd
        .arg("role")
        .arg("master")
        .args(["--listen", "127.0.0.1:0"])
        .args(["--expect", &expect.to_string()])
        .args(["--data", &data])
        .args(["--rounds", &cfg.rounds.to_string()])
        .args(["--timeout", &timeout_s])
        .args(["--node-id", "master"])
        .arg("--out")
        .arg(&model_path);
    if let Some(limit) = cfg.limit {
        master_cmd.args(["--max-features", &limit.to_string()]);
    }
    let mut master = Node::spawn("master", master_cmd)?;
    let master_addr = master.await_listening(cfg.timeout)?;

    let mut nodes: Vec<Node> = Vec::new();
    let worker_cmd = |node_id: &str, parent: &str| {
        let mut cmd = Command::new(&cfg.binary);
        cmd.arg("role")
            .arg("worker")
            .args(["--parent", parent])
            .args(["--timeout", &timeout_s])
            .args(["--node-id", node_id])
            .args(["--workers", &cfg.worker_budget.to_string()]);
        cmd
    };
    match cfg.topology {
        Topology::OneLevel { workers } => {
            for i in 0..workers {
                let id = format!("w{i}");
                nodes.push(Node::spawn(&id, worker_cmd(&id, &master_addr))?);
            }
        }
        Topology::TwoLevel { submasters, fanout } => {
            for i in 0..submasters {
                let id = format!("s{i}");
                let mut cmd = Command::new(&cfg.binary);
                cmd.arg("role")
                    .arg("submaster")
                    .args(["--parent", &master_addr])
                    .args(["--listen", "127.0.0.1:0"])
                    .args(["--expect", &fanout.to_string()])
                    .args(["--timeout", &timeout_s])
                    .args(["--node-id", &id]);
                let mut sub = Node::spawn(&id, cmd)?;
                let sub_addr = sub.await_listening(cfg.timeout)?;
                nodes.push(sub);
                for j in 0..fanout {
                    let wid = format!("s{i}-w{j}");
                    nodes.push(Node::spawn(&wid, worker_cmd(&wid, &sub_addr))?);
                }
            }
        }
    }

    // Generous overall deadline: per-message timeout plus scan time for
    // every round, all sharing however many cores this host has.
    let deadline = Instant::now() + cfg.timeout + cfg.timeout * cfg.rounds;
    let mut first_failure: Option<Error> = None;
    let mut all = vec![master];
    all.append(&mut nodes);
    for node in all.iter_mut() {
        if let Err(e) = node.finish(deadline) {
            first_failure.get_or_insert(e);
        }
    }
    if let Some(e) = first_failure {
        return Err(e);
    }

    let mut timings = Vec::new();
    for node in all.iter_mut() {
        node.drain();
        for line in &node.collected {
            if let Some(t) = parse_timing(line) {
                timings.push(NodeTiming {
                    node_id: node.node_id.clone(),
                    timing: t,
                });
            }
        }
    }

    let model_json = std::fs::read_to_string(&model_path)?;
    let classifier = model::from_json(&model_json)?;
    Ok(SimOutcome {
        classifier,
        model_json,
        timings,
    })
}

/// Parses a `TIMING node=<id> round=<t> phase=<p> seconds=<s>` line.
fn parse_timing(line: &str) -> Option<RoundTiming> {
    let rest = line.strip_prefix("TIMING ")?;
    let mut round = None;
    let mut phase = None;
    let mut seconds = None;
    for field in rest.split_whitespace() {
        let (key, value) = field.split_once('=')?;
        match key {
            "round" => round = value.parse::<u32>().ok(),
            "phase" => {
                phase = match value {
                    "normalize" => Some(Phase::Normalize),
                    "scan" => Some(Phase::Scan),
                    "reduce" => Some(Phase::Reduce),
                    "update" => Some(Phase::Update),
                    _ => None,
                }
            }
            "seconds" => seconds = value.parse::<f64>().ok(),
            _ => {}
        }
    }
    Some(RoundTiming {
        round: round?,
        phase: phase?,
        seconds: seconds?,
    })
}
