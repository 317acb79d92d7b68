//! Streaming session endpoint.
//!
//! One JSON message per line over TCP, or one per text frame after a
//! WebSocket upgrade on the same port. Every `frame` gets exactly one
//! `pose` reply followed by any `event` messages, all carrying the frame's
//! `seq`. A client that closes its write half receives a final
//! `metrics_snapshot`; one can also be requested at any time.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::Arc;
use std::thread;

use fingermap_core::mapping::{GestureEvent, SideOutput};
use fingermap_core::metrics::{interaction_volume, VolumeReport};
use fingermap_core::task_lab::Target;
use fingermap_core::{BodyCalibration, HandFrame, Joint, MappingParams, MappingSession, Side, Vec3};
use log::{debug, info, warn};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::trace_io::encode;

pub const PROTOCOL_VERSION: u32 = 1;
pub const SERVER_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum ClientMessage {
    Hello {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        client: Option<String>,
        /// Replaces the server's calibration for this session.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        calibration: Option<BodyCalibration>,
    },
    Frame {
        seq: u64,
        frame: HandFrame,
    },
    /// Merge patch over the current parameters.
    SetParams {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seq: Option<u64>,
        params: Value,
    },
    MetricsSnapshot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
#[allow(clippy::large_enum_variant)]
pub enum SideReply {
    Pose(SideOutput),
    Error { side: Side, error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideStats {
    pub side: Side,
    pub poses: u64,
    pub errors: u64,
    pub pointer_path: f64,
    pub physical_wrist_path: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interaction_volume: Option<VolumeReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello {
        server_version: String,
        protocol: u32,
        calibration: BodyCalibration,
        params: MappingParams,
    },
    Pose {
        seq: u64,
        t: f64,
        sides: Vec<SideReply>,
    },
    Event {
        seq: u64,
        #[serde(flatten)]
        event: GestureEvent,
    },
    /// The parameters now in force.
    SetParams {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seq: Option<u64>,
        params: MappingParams,
    },
    Error {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seq: Option<u64>,
        message: String,
    },
    MetricsSnapshot {
        frames: u64,
        events: u64,
        sides: Vec<SideStats>,
    },
}

/// Settings shared read-only by all sessions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ServerConfig {
    pub calibration: BodyCalibration,
    pub params: MappingParams,
    pub targets: Vec<Target>,
}

#[derive(Debug, Default)]
struct Tracker {
    poses: u64,
    errors: u64,
    last_pointer: Option<Vec3>,
    last_wrist: Option<Vec3>,
    pointer_path: f64,
    wrist_path: f64,
    tips: Vec<(f64, Vec3)>,
}

/// Replies to one client message and whether the session must end.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Reply {
    pub messages: Vec<ServerMessage>,
    pub close: bool,
}

impl Reply {
    fn one(m: ServerMessage) -> Reply {
        Reply {
            messages: vec![m],
            close: false,
        }
    }

    fn violation(seq: Option<u64>, message: impl Into<String>) -> Reply {
        Reply {
            messages: vec![ServerMessage::Error {
                seq,
                message: message.into(),
            }],
            close: true,
        }
    }
}

/// Transport-independent protocol state of one client.
pub struct Session {
    config: Arc<ServerConfig>,
    mapping: Option<MappingSession>,
    last_seq: Option<u64>,
    frames: u64,
    events: u64,
    trackers: [Tracker; 2],
}

impl Session {
    pub fn new(config: Arc<ServerConfig>) -> Session {
        Session {
            config,
            mapping: None,
            last_seq: None,
            frames: 0,
            events: 0,
            trackers: Default::default(),
        }
    }

    pub fn handle_line(&mut self, line: &str) -> Reply {
        match serde_json::from_str::<ClientMessage>(line) {
            Ok(m) => self.handle(m),
            Err(e) => Reply::violation(None, format!("unreadable message: {e}")),
        }
    }

    pub fn handle(&mut self, msg: ClientMessage) -> Reply {
        match msg {
            ClientMessage::Hello { client, calibration } => {
                if self.mapping.is_some() {
                    return Reply::violation(None, "duplicate hello");
                }
                let calibration = calibration.unwrap_or(self.config.calibration);
                let mut mapping = match MappingSession::new(calibration, self.config.params) {
                    Ok(m) => m,
                    Err(e) => return Reply::violation(None, format!("rejected calibration: {e}")),
                };
                mapping.set_targets(self.config.targets.clone());
                debug!("hello from {}", client.as_deref().unwrap_or("anonymous client"));
                self.mapping = Some(mapping);
                Reply::one(ServerMessage::Hello {
                    server_version: SERVER_VERSION.to_string(),
                    protocol: PROTOCOL_VERSION,
                    calibration,
                    params: self.config.params,
                })
            }
            ClientMessage::Frame { seq, frame } => self.frame(seq, &frame),
            ClientMessage::SetParams { seq, params } => {
                let Some(mapping) = self.mapping.as_mut() else {
                    return Reply::violation(seq, "set_params before hello");
                };
                let mut merged = match serde_json::to_value(mapping.params()) {
                    Ok(v) => v,
                    Err(e) => return Reply::violation(seq, e.to_string()),
                };
                json_patch::merge(&mut merged, &params);
                let next = match serde_json::from_value::<MappingParams>(merged) {
                    Ok(p) => p,
                    Err(e) => return Reply::one(error(seq, format!("invalid parameters: {e}"))),
                };
                if let Err(e) = mapping.set_params(next) {
                    return Reply::one(error(seq, format!("invalid parameters: {e}")));
                }
                Reply::one(ServerMessage::SetParams {
                    seq,
                    params: *mapping.params(),
                })
            }
            ClientMessage::MetricsSnapshot => Reply::one(self.snapshot()),
        }
    }

    fn frame(&mut self, seq: u64, frame: &HandFrame) -> Reply {
        let Some(mapping) = self.mapping.as_mut() else {
            return Reply::violation(Some(seq), "frame before hello");
        };
        if self.last_seq.is_some_and(|last| seq <= last) {
            return Reply::violation(Some(seq), "sequence numbers must increase");
        }
        self.last_seq = Some(seq);
        self.frames += 1;
        let out = mapping.process(frame);
        let mut sides = Vec::with_capacity(out.sides.len());
        for (side, result) in out.sides {
            let tr = &mut self.trackers[side.index()];
            match result {
                Ok(o) => {
                    tr.poses += 1;
                    if let Some(p) = tr.last_pointer {
                        tr.pointer_path += p.distance(o.pointer);
                    }
                    tr.last_pointer = Some(o.pointer);
                    if let Some(hand) = frame.hand(side) {
                        let w = hand.wrist.position;
                        if let Some(p) = tr.last_wrist {
                            tr.wrist_path += p.distance(w);
                        }
                        tr.last_wrist = Some(w);
                        if let Some(tip) = hand.joints.get(Joint::IndexTip) {
                            tr.tips.push((frame.t, tip));
                        }
                    }
                    sides.push(SideReply::Pose(o));
                }
                Err(e) => {
                    tr.errors += 1;
                    sides.push(SideReply::Error {
                        side,
                        error: e.to_string(),
                    });
                }
            }
        }
        let mut messages = vec![ServerMessage::Pose { seq, t: frame.t, sides }];
        self.events += out.events.len() as u64;
        messages.extend(out.events.into_iter().map(|event| ServerMessage::Event { seq, event }));
        Reply { messages, close: false }
    }

    pub fn snapshot(&self) -> ServerMessage {
        let sides = Side::BOTH
            .iter()
            .map(|&side| {
                let tr = &self.trackers[side.index()];
                SideStats {
                    side,
                    poses: tr.poses,
                    errors: tr.errors,
                    pointer_path: tr.pointer_path,
                    physical_wrist_path: tr.wrist_path,
                    interaction_volume: interaction_volume(&tr.tips, 1.0).ok(),
                }
            })
            .collect();
        ServerMessage::MetricsSnapshot {
            frames: self.frames,
            events: self.events,
            sides,
        }
    }
}

fn error(seq: Option<u64>, message: String) -> ServerMessage {
    ServerMessage::Error { seq, message }
}

/// Handle to a server running on a background thread.
pub struct ServerHandle {
    pub addr: SocketAddr,
    thread: thread::JoinHandle<()>,
}

impl ServerHandle {
    pub fn is_running(&self) -> bool {
        !self.thread.is_finished()
    }
}

/// Binds `addr` and serves on a background thread.
pub fn spawn(addr: &str, config: ServerConfig) -> io::Result<ServerHandle> {
    let listener = TcpListener::bind(addr)?;
    let addr = listener.local_addr()?;
    let thread = thread::spawn(move || {
        if let Err(e) = serve(listener, config) {
            warn!("server stopped: {e}");
        }
    });
    Ok(ServerHandle { addr, thread })
}

/// Accepts connections forever, one thread per session.
pub fn serve(listener: TcpListener, config: ServerConfig) -> io::Result<()> {
    let config = Arc::new(config);
    for stream in listener.incoming() {
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                warn!("accept failed: {e}");
                continue;
            }
        };
        let config = Arc::clone(&config);
        thread::spawn(move || {
            let peer = stream.peer_addr().ok();
            if let Err(e) = handle_connection(stream, config) {
                warn!("session {peer:?} ended with error: {e}");
            }
        });
    }
    Ok(())
}

fn handle_connection(stream: TcpStream, config: Arc<ServerConfig>) -> io::Result<()> {
    stream.set_nodelay(true)?;
    if is_http_upgrade(&stream)? {
        serve_websocket(stream, config)
    } else {
        serve_lines(stream, config)
    }
}

fn is_http_upgrade(stream: &TcpStream) -> io::Result<bool> {
    const GET: &[u8] = b"GET ";
    let mut buf = [0u8; 4];
    loop {
        let n = stream.peek(&mut buf)?;
        if n == 0 || buf[..n] != GET[..n] {
            return Ok(false);
        }
        if n == GET.len() {
            return Ok(true);
        }
        thread::yield_now();
    }
}

fn serve_lines(stream: TcpStream, config: Arc<ServerConfig>) -> io::Result<()> {
    let mut session = Session::new(config);
    let reader = BufReader::new(stream.try_clone()?);
    let mut writer = io::BufWriter::new(stream);
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = session.handle_line(&line);
        for m in &reply.messages {
            writeln!(writer, "{}", encode(m).map_err(io::Error::other)?)?;
        }
        writer.flush()?;
        if reply.close {
            info!("closing session after protocol violation");
            return writer.get_ref().shutdown(Shutdown::Both);
        }
    }
    writeln!(writer, "{}", encode(&session.snapshot()).map_err(io::Error::other)?)?;
    writer.flush()?;
    writer.get_ref().shutdown(Shutdown::Both)
}

fn serve_websocket(stream: TcpStream, config: Arc<ServerConfig>) -> io::Result<()> {
    use tungstenite::{Error as WsError, Message};

    let mut ws = tungstenite::accept(stream).map_err(io::Error::other)?;
    let mut session = Session::new(config);
    loop {
        let msg = match ws.read() {
            Ok(m) => m,
            Err(WsError::ConnectionClosed | WsError::AlreadyClosed) => return Ok(()),
            Err(e) => return Err(io::Error::other(e)),
        };
        let text = match msg {
            Message::Text(t) => t,
            Message::Binary(b) => String::from_utf8_lossy(&b).into_owned(),
            Message::Close(_) => continue,
            _ => continue,
        };
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let reply = session.handle_line(line);
            for m in &reply.messages {
                let s = encode(m).map_err(io::Error::other)?;
                ws.send(Message::text(s)).map_err(io::Error::other)?;
            }
            if reply.close {
                let _ = ws.close(None);
                let _ = ws.flush();
                return Ok(());
            }
        }
    }
}
