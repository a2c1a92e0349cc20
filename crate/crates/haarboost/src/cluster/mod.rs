//! Distributed training over a line-delimited JSON protocol: one master,
//! optional sub-masters, and workers that scan feature ranges. Every float
//! crosses the wire at 17 significant digits, so a cluster run reproduces
//! the sequential reference bit-for-bit.

mod master;
mod sim;
mod submaster;
mod worker;

pub use master::{run_master, MasterConfig};
pub use sim::{simulate_local, NodeTiming, SimConfig, SimOutcome};
pub use submaster::{run_submaster, SubMasterConfig};
pub use worker::{run_worker, WorkerConfig};

use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::dataset::DatasetRef;
use crate::{Error, Result};

/// Process tree shape for a training job.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    /// Workers attach directly to the master.
    OneLevel { workers: u32 },
    /// Sub-masters attach to the master; `fanout` workers attach to each.
    TwoLevel { submasters: u32, fanout: u32 },
}

impl Topology {
    /// Direct children of the master.
    pub fn master_children(&self) -> u32 {
        match *self {
            Topology::OneLevel { workers } => workers,
            Topology::TwoLevel { submasters, .. } => submasters,
        }
    }

    pub fn total_workers(&self) -> u32 {
        match *self {
            Topology::OneLevel { workers } => workers,
            Topology::TwoLevel { submasters, fanout } => submasters * fanout,
        }
    }
}

/// One wire message. The serialized form is a single-line JSON object whose
/// `type` field names the variant; unknown fields are rejected on decode.
#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    /// Child -> parent, immediately after connecting.
    Hello { node_id: String, role: String },
    /// Parent -> child: the job description and the child's feature range.
    Assign {
        dataset: DatasetRef,
        dataset_hash: String,
        start: u32,
        end: u32,
        rounds: u32,
        window: u32,
    },
    /// Master -> leaves: this round's full weight array.
    Weights { round: u32, weights: Vec<f64> },
    /// Leaf -> master: the range winner for `round`.
    Best {
        round: u32,
        feature_index: u32,
        theta: f64,
        polarity: i8,
        error: f64,
    },
    /// Master -> children at job end: the finished model document text.
    Model { model: String },
    /// Any -> any: fail-stop abort carrying the origin and reason.
    Error { node_id: String, reason: String },
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Hello { .. } => "HELLO",
            Message::Assign { .. } => "ASSIGN",
            Message::Weights { .. } => "WEIGHTS",
            Message::Best { .. } => "BEST",
            Message::Model { .. } => "MODEL",
            Message::Error { .. } => "ERROR",
        }
    }
}

// Encoding goes through an internally-tagged mirror enum (tagged enums
// serialize fine); decoding dispatches on the extracted `type` so each
// per-message struct can carry `deny_unknown_fields`, which tagged enums
// do not honor.

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "UPPERCASE")]
enum MessageOut<'a> {
    Hello {
        node_id: &'a str,
        role: &'a str,
    },
    Assign {
        dataset: &'a DatasetRef,
        dataset_hash: &'a str,
        start: u32,
        end: u32,
        rounds: u32,
        window: u32,
    },
    Weights {
        round: u32,
        weights: &'a [f64],
    },
    Best {
        round: u32,
        feature_index: u32,
        theta: f64,
        polarity: i8,
        error: f64,
    },
    Model {
        model: &'a str,
    },
    Error {
        node_id: &'a str,
        reason: &'a str,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HelloIn {
    node_id: String,
    role: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AssignIn {
    dataset: DatasetRef,
    dataset_hash: String,
    start: u32,
    end: u32,
    rounds: u32,
    window: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsIn {
    round: u32,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BestIn {
    round: u32,
    feature_index: u32,
    theta: f64,
    polarity: i8,
    error: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelIn {
    model: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ErrorIn {
    node_id: String,
    reason: String,
}

/// Renders a message as its single-line wire form (no trailing newline).
pub fn encode(msg: &Message) -> Result<String> {
    let out = match msg {
        Message::Hello { node_id, role } => MessageOut::Hello { node_id, role },
        Message::Assign {
            dataset,
            dataset_hash,
            start,
            end,
            rounds,
            window,
        } => MessageOut::Assign {
            dataset,
            dataset_hash,
            start: *start,
            end: *end,
            rounds: *rounds,
            window: *window,
        },
        Message::Weights { round, weights } => MessageOut::Weights {
            round: *round,
            weights,
        },
        Message::Best {
            round,
            feature_index,
            theta,
            polarity,
            error,
        } => MessageOut::Best {
            round: *round,
            feature_index: *feature_index,
            theta: *theta,
            polarity: *polarity,
            error: *error,
        },
        Message::Model { model } => MessageOut::Model { model },
        Message::Error { node_id, reason } => MessageOut::Error { node_id, reason },
    };
    Ok(crate::jsonio::to_string(&out)?)
}

/// Parses one wire line. Unknown `type` values and unknown fields are
/// protocol errors, as is a missing `type`.
pub fn decode(line: &str) -> std::result::Result<Message, String> {
    let mut value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| format!("malformed message: {e}"))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| "message is not a JSON object".to_string())?;
    let kind = match obj.remove("type") {
        Some(serde_json::Value::String(s)) => s,
        Some(_) => return Err("message \"type\" is not a string".to_string()),
        None => return Err("message missing \"type\" field".to_string()),
    };
    let rest = value;
    let decoded = match kind.as_str() {
        "HELLO" => serde_json::from_value::<HelloIn>(rest)
            .map(|m| Message::Hello {
                node_id: m.node_id,
                role: m.role,
            })
            .map_err(|e| e.to_string()),
        "ASSIGN" => serde_json::from_value::<AssignIn>(rest)
            .map(|m| Message::Assign {
                dataset: m.dataset,
                dataset_hash: m.dataset_hash,
                start: m.start,
                end: m.end,
                rounds: m.rounds,
                window: m.window,
            })
            .map_err(|e| e.to_string()),
        "WEIGHTS" => serde_json::from_value::<WeightsIn>(rest)
            .map(|m| Message::Weights {
                round: m.round,
                weights: m.weights,
            })
            .map_err(|e| e.to_string()),
        "BEST" => serde_json::from_value::<BestIn>(rest)
            .map(|m| Message::Best {
                round: m.round,
                feature_index: m.feature_index,
                theta: m.theta,
                polarity: m.polarity,
                error: m.error,
            })
            .map_err(|e| e.to_string()),
        "MODEL" => serde_json::from_value::<ModelIn>(rest)
            .map(|m| Message::Model { model: m.model })
            .map_err(|e| e.to_string()),
        "ERROR" => serde_json::from_value::<ErrorIn>(rest)
            .map(|m| Message::Error {
                node_id: m.node_id,
                reason: m.reason,
            })
            .map_err(|e| e.to_string()),
        other => Err(format!("unknown message type {other:?}")),
    };
    decoded.map_err(|e| format!("bad {kind} message: {e}"))
}

/// A line-framed connection with a per-read timeout.
#[derive(Debug)]
pub struct LineConn {
    writer: TcpStream,
    reader: BufReader<TcpStream>,
}

impl LineConn {
    pub fn new(stream: TcpStream, timeout: Duration) -> std::io::Result<LineConn> {
        stream.set_nodelay(true)?;
        stream.set_read_timeout(Some(timeout))?;
        let writer = stream.try_clone()?;
        Ok(LineConn {
            writer,
            reader: BufReader::new(stream),
        })
    }

    /// Sends one already-encoded line verbatim. Relays use this so bytes
    /// survive hops unchanged.
    pub fn send_line(&mut self, line: &str) -> std::io::Result<()> {
        debug_assert!(!line.contains('\n'));
        let mut framed = String::with_capacity(line.len() + 1);
        framed.push_str(line);
        framed.push('\n');
        self.writer.write_all(framed.as_bytes())
    }

    pub fn send(&mut self, msg: &Message) -> Result<()> {
        let line = encode(msg)?;
        self.send_line(&line).map_err(Error::Io)
    }

    /// Receives one raw line (without the newline). Timeouts and closed
    /// connections surface as distinguishable reasons.
    pub fn recv_line(&mut self) -> std::result::Result<String, String> {
        let mut line = String::new();
        match self.reader.read_line(&mut line) {
            Ok(0) => Err("connection closed by peer".to_string()),
            Ok(_) => {
                while line.ends_with('\n') || line.ends_with('\r') {
                    line.pop();
                }
                Ok(line)
            }
            Err(e)
                if e.kind() == std::io::ErrorKind::WouldBlock
                    || e.kind() == std::io::ErrorKind::TimedOut =>
            {
                Err("timed out waiting for message".to_string())
            }
            Err(e) => Err(format!("read failed: {e}")),
        }
    }

    pub fn recv(&mut self) -> std::result::Result<Message, String> {
        decode(&self.recv_line()?)
    }
}

/// Dials `addr`, retrying until `timeout` elapses (children routinely start
/// before their parent is listening).
pub fn connect_retry(
    addr: &str,
    timeout: Duration,
    role: &'static str,
    node_id: &str,
) -> Result<LineConn> {
    let deadline = Instant::now() + timeout;
    loop {
        match TcpStream::connect(addr) {
            Ok(stream) => {
                return LineConn::new(stream, timeout).map_err(Error::Io);
            }
            Err(e) => {
                if Instant::now() >= deadline {
                    return Err(Error::protocol(
                        role,
                        node_id,
                        format!("cannot reach parent {addr}: {e}"),
                    ));
                }
                std::thread::sleep(Duration::from_millis(25));
            }
        }
    }
}

/// A connected, identified child.
#[derive(Debug)]
pub struct Child {
    pub node_id: String,
    pub role: String,
    pub conn: LineConn,
}

/// Accepts exactly `expect` children, each of which must open with HELLO.
/// Returns them in connection order. Fewer than `expect` by the deadline is
/// an error naming the missing count.
pub fn accept_children(
    listener: &TcpListener,
    expect: u32,
    timeout: Duration,
    role: &'static str,
    node_id: &str,
) -> Result<Vec<Child>> {
    listener.set_nonblocking(true)?;
    let deadline = Instant::now() + timeout;
    let mut children = Vec::with_capacity(expect as usize);
    while (children.len() as u32) < expect {
        match listener.accept() {
            Ok((stream, _)) => {
                stream.set_nonblocking(false)?;
                let mut conn = LineConn::new(stream, timeout)?;
                match conn.recv() {
                    Ok(Message::Hello {
                        node_id: child_id,
                        role: child_role,
                    }) => children.push(Child {
                        node_id: child_id,
                        role: child_role,
                        conn,
                    }),
                    Ok(other) => {
                        return Err(Error::protocol(
                            role,
                            node_id,
                            format!("expected HELLO, got {}", other.kind()),
                        ))
                    }
                    Err(reason) => {
                        return Err(Error::protocol(
                            role,
                            node_id,
                            format!("handshake failed: {reason}"),
                        ))
                    }
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                if Instant::now() >= deadline {
                    return Err(Error::protocol(
                        role,
                        node_id,
                        format!(
                            "timed out waiting for children: expected {expect}, got {}",
                            children.len()
                        ),
                    ));
                }
                std::thread::sleep(Duration::from_millis(5));
            }
            Err(e) => return Err(Error::Io(e)),
        }
    }
    Ok(children)
}

/// Binds a listener and reports the actual bound address (useful with
/// port 0).
pub fn bind(listen: &str) -> Result<(TcpListener, SocketAddr)> {
    let listener = TcpListener::bind(listen)?;
    let addr = listener.local_addr()?;
    Ok((listener, addr))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round_trip(msg: Message) {
        let line = encode(&msg).unwrap();
        assert!(!line.contains('\n'));
        let back = decode(&line).unwrap();
        assert_eq!(back, msg);
    }

    #[test]
    fn messages_round_trip() {
        round_trip(Message::Hello {
            node_id: "w3".into(),
            role: "worker".into(),
        });
        round_trip(Message::Assign {
            dataset: DatasetRef::Synth {
                seed: 7,
                positives: 100,
                negatives: 100,
            },
            dataset_hash: "ab".repeat(32),
            start: 0,
            end: 27_600,
            rounds: 10,
            window: 24,
        });
        round_trip(Message::Weights {
            round: 3,
            weights: vec![0.25, 1.0 / 3.0, f64::MIN_POSITIVE, 5e-324],
        });
        round_trip(Message::Best {
            round: 3,
            feature_index: 1234,
            theta: -17.5,
            polarity: -1,
            error: 0.087_654_321_012_345_67,
        });
        round_trip(Message::Model {
            model: r#"{"version":1}"#.into(),
        });
        round_trip(Message::Error {
            node_id: "s1".into(),
            reason: "dataset hash mismatch".into(),
        });
    }

    #[test]
    fn weights_cross_the_wire_bit_exactly() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(99);
        let weights: Vec<f64> = (0..500).map(|_| rng.gen_range(1e-12..1.0)).collect();
        let msg = Message::Weights {
            round: 1,
            weights: weights.clone(),
        };
        match decode(&encode(&msg).unwrap()).unwrap() {
            Message::Weights { weights: back, .. } => {
                for (a, b) in weights.iter().zip(&back) {
                    assert_eq!(a.to_bits(), b.to_bits());
                }
            }
            other => panic!("wrong variant {}", other.kind()),
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let line = r#"{"type":"BEST","round":1,"feature_index":0,"theta":0.5,"polarity":1,"error":0.1,"extra":true}"#;
        let err = decode(line).unwrap_err();
        assert!(err.contains("extra"), "{err}");
    }

    #[test]
    fn unknown_type_and_missing_type_are_rejected() {
        assert!(decode(r#"{"type":"NOPE"}"#)
            .unwrap_err()
            .contains("unknown message type"));
        assert!(decode(r#"{"round":1}"#)
            .unwrap_err()
            .contains("missing \"type\""));
        assert!(decode("not json").unwrap_err().contains("malformed"));
        assert!(decode("[1,2]").unwrap_err().contains("not a JSON object"));
    }

    #[test]
    fn missing_required_field_is_rejected() {
        let err = decode(r#"{"type":"WEIGHTS","round":1}"#).unwrap_err();
        assert!(err.contains("WEIGHTS"), "{err}");
    }

    #[test]
    fn wire_floats_use_17_significant_digits() {
        let line = encode(&Message::Best {
            round: 1,
            feature_index: 0,
            theta: 0.5,
            polarity: 1,
            error: 0.25,
        })
        .unwrap();
        assert!(line.contains("5.0000000000000000e-1"), "{line}");
        assert!(line.contains("2.5000000000000000e-1"), "{line}");
    }

    #[test]
    fn loopback_conversation() {
        let (listener, addr) = bind("127.0.0.1:0").unwrap();
        let timeout = Duration::from_secs(5);
        let client = std::thread::spawn(move || {
            let mut conn =
                connect_retry(&addr.to_string(), timeout, "worker", "w0").unwrap();
            conn.send(&Message::Hello {
                node_id: "w0".into(),
                role: "worker".into(),
            })
            .unwrap();
            match conn.recv().unwrap() {
                Message::Weights { round, weights } => {
                    assert_eq!(round, 1);
                    assert_eq!(weights, vec![0.5, 0.5]);
                }
                other => panic!("unexpected {}", other.kind()),
            }
        });
        let mut children = accept_children(&listener, 1, timeout, "master", "m").unwrap();
        assert_eq!(children.len(), 1);
        assert_eq!(children[0].node_id, "w0");
        assert_eq!(children[0].role, "worker");
        children[0]
            .conn
            .send(&Message::Weights {
                round: 1,
                weights: vec![0.5, 0.5],
            })
            .unwrap();
        client.join().unwrap();
    }

    #[test]
    fn accept_timeout_names_the_missing_count() {
        let (listener, _) = bind("127.0.0.1:0").unwrap();
        let err = accept_children(
            &listener,
            3,
            Duration::from_millis(80),
            "master",
            "m",
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("expected 3, got 0"), "{err}");
    }

    #[test]
    fn connect_retry_times_out_on_unreachable_parent() {
        // A bound-then-dropped listener leaves a port nothing listens on.
        let addr = {
            let (listener, addr) = bind("127.0.0.1:0").unwrap();
            drop(listener);
            addr
        };
        let started = Instant::now();
        let err = connect_retry(
            &addr.to_string(),
            Duration::from_millis(150),
            "worker",
            "w0",
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("cannot reach parent"), "{err}");
        assert!(started.elapsed() < Duration::from_secs(10));
    }
}
