use std::io::{BufRead, BufReader, Write};
use std::net::{Shutdown, TcpStream};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use fingermap::service::{
    spawn, ClientMessage, ServerConfig, ServerHandle, ServerMessage, Session, SideReply, SERVER_VERSION,
};
use fingermap::trace_io::encode;
use fingermap_core::task_lab::{synth_reach, HandModel, SynthTraceSpec};
use fingermap_core::{BodyCalibration, HandFrame, Joint, MappingParams, Pose, Rotation, Side, Vec3};
use serde_json::json;

fn frames(n: usize, start: Vec3, end: Vec3) -> Vec<HandFrame> {
    let spec = SynthTraceSpec::Reach {
        side: Side::Right,
        hmd: Pose::from_position(Vec3::new(0.0, 1.2, 0.0)),
        start,
        end,
        wrist_rotation: Rotation::IDENTITY,
        duration: (n - 1) as f64 / 60.0,
        rate: 60.0,
        r_start: 1.0,
        r_end: 0.6,
        t0: 0.0,
    };
    let f = synth_reach(&spec, &HandModel::default()).unwrap();
    assert_eq!(f.len(), n);
    f
}

fn reach(n: usize) -> Vec<HandFrame> {
    frames(n, Vec3::new(0.2, 0.9, 0.2), Vec3::new(0.1, 1.05, 0.45))
}

fn server() -> ServerHandle {
    spawn("127.0.0.1:0", ServerConfig::default()).unwrap()
}

struct LineClient {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl LineClient {
    fn connect(h: &ServerHandle) -> LineClient {
        let s = TcpStream::connect(h.addr).unwrap();
        s.set_read_timeout(Some(Duration::from_secs(20))).unwrap();
        LineClient {
            reader: BufReader::new(s.try_clone().unwrap()),
            writer: s,
        }
    }

    fn send(&mut self, m: &ClientMessage) {
        self.send_raw(&encode(m).unwrap());
    }

    fn send_raw(&mut self, line: &str) {
        writeln!(self.writer, "{line}").unwrap();
    }

    /// Next message, or `None` once the server has closed the connection.
    fn recv(&mut self) -> Option<ServerMessage> {
        let mut line = String::new();
        match self.reader.read_line(&mut line) {
            Ok(0) => None,
            Ok(_) => Some(serde_json::from_str(&line).unwrap()),
            Err(_) => None,
        }
    }

    fn hello(&mut self) -> ServerMessage {
        self.send(&ClientMessage::Hello {
            client: Some("test".into()),
            calibration: None,
        });
        self.recv().unwrap()
    }

    fn finish(&mut self) {
        self.writer.shutdown(Shutdown::Write).unwrap();
    }
}

fn frame_msg(seq: u64, frame: HandFrame) -> ClientMessage {
    ClientMessage::Frame { seq, frame }
}

fn pose_output(m: &ServerMessage) -> (u64, fingermap_core::mapping::SideOutput) {
    match m {
        ServerMessage::Pose { seq, sides, .. } => match &sides[0] {
            SideReply::Pose(o) => (*seq, *o),
            other => panic!("side error: {other:?}"),
        },
        other => panic!("expected pose, got {other:?}"),
    }
}

#[test]
fn hello_is_acknowledged_with_version() {
    let h = server();
    let mut c = LineClient::connect(&h);
    match c.hello() {
        ServerMessage::Hello {
            server_version,
            protocol,
            params,
            ..
        } => {
            assert_eq!(server_version, SERVER_VERSION);
            assert_eq!(protocol, 1);
            assert_eq!(params, MappingParams::default());
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn every_frame_gets_one_pose_in_order() {
    let h = server();
    let mut c = LineClient::connect(&h);
    c.hello();
    let fs = reach(120);
    for (i, f) in fs.iter().enumerate() {
        c.send(&frame_msg(10 + 2 * i as u64, *f));
    }
    c.finish();
    let mut seqs = Vec::new();
    let mut snapshot = None;
    while let Some(m) = c.recv() {
        match m {
            ServerMessage::Pose { seq, .. } => seqs.push(seq),
            ServerMessage::MetricsSnapshot { .. } => snapshot = Some(m),
            ServerMessage::Event { .. } => {}
            other => panic!("{other:?}"),
        }
    }
    let expected: Vec<u64> = (0..120).map(|i| 10 + 2 * i).collect();
    assert_eq!(seqs, expected);
    match snapshot.expect("snapshot after end of input") {
        ServerMessage::MetricsSnapshot { frames, sides, .. } => {
            assert_eq!(frames, 120);
            let right = sides.iter().find(|s| s.side == Side::Right).unwrap();
            assert_eq!(right.poses, 120);
            assert_eq!(right.errors, 0);
            assert!(right.pointer_path > 0.0 && right.physical_wrist_path > 0.0);
            assert!(right.interaction_volume.is_some());
        }
        _ => unreachable!(),
    }
}

#[test]
fn set_params_takes_effect_on_the_next_frame() {
    let h = server();
    let mut c = LineClient::connect(&h);
    c.hello();
    let still = frames(30, Vec3::new(0.25, 0.95, 0.45), Vec3::new(0.25, 0.95, 0.45));
    let mut seq = 0;
    let mut offsets = Vec::new();
    for f in &still[..15] {
        seq += 1;
        c.send(&frame_msg(seq, *f));
        offsets.push(pose_output(&c.recv().unwrap()).1.offset);
    }
    c.send(&ClientMessage::SetParams {
        seq: None,
        params: json!({"k": 0.8}),
    });
    match c.recv().unwrap() {
        ServerMessage::SetParams { params, .. } => assert_eq!(params.k, 0.8),
        other => panic!("{other:?}"),
    }
    let mut t = still[14].t;
    for f in &still[15..] {
        seq += 1;
        let mut f = *f;
        t += 1.0 / 60.0;
        f.t = t;
        c.send(&frame_msg(seq, f));
        offsets.push(pose_output(&c.recv().unwrap()).1.offset);
    }
    let before = offsets[14];
    let after = offsets[15];
    assert!(before > 0.0);
    // Recover the excess beyond the dead zone from offset = e + k e^2.
    let e = (-1.0 + (1.0 + 4.0 * 0.6 * before).sqrt()) / (2.0 * 0.6);
    let expected = 0.2 * e * e;
    assert!(
        ((after - before) - expected).abs() < 1e-8,
        "{} vs {expected}",
        after - before
    );
    assert!(after - before <= 0.2 * e * e + 1e-8);
    assert!(offsets[15..].windows(2).all(|w| (w[0] - w[1]).abs() < 1e-8));
}

#[test]
fn invalid_params_are_refused_but_session_continues() {
    let h = server();
    let mut c = LineClient::connect(&h);
    c.hello();
    c.send(&ClientMessage::SetParams {
        seq: Some(3),
        params: json!({"r_min": 2.0}),
    });
    match c.recv().unwrap() {
        ServerMessage::Error { seq, message } => {
            assert_eq!(seq, Some(3));
            assert!(message.contains("invalid parameters"), "{message}");
        }
        other => panic!("{other:?}"),
    }
    c.send(&frame_msg(1, reach(2)[0]));
    assert_eq!(pose_output(&c.recv().unwrap()).0, 1);
}

fn expect_violation(lines: &[String], needle: &str) {
    let h = server();
    let mut c = LineClient::connect(&h);
    for l in lines {
        c.send_raw(l);
    }
    let mut last_error = None;
    while let Some(m) = c.recv() {
        if let ServerMessage::Error { message, .. } = m {
            last_error = Some(message);
        }
    }
    let message = last_error.expect("an error before close");
    assert!(message.contains(needle), "{message}");
}

#[test]
fn protocol_violations_close_the_session() {
    let hello = encode(&ClientMessage::Hello {
        client: None,
        calibration: None,
    })
    .unwrap();
    let f = reach(2);
    let frame = |seq: u64, i: usize| encode(&frame_msg(seq, f[i])).unwrap();
    expect_violation(&[frame(1, 0)], "frame before hello");
    expect_violation(&[hello.clone(), hello.clone()], "duplicate hello");
    expect_violation(
        &[hello.clone(), frame(5, 0), frame(5, 1)],
        "sequence numbers must increase",
    );
    expect_violation(
        &[hello.clone(), "{\"kind\": \"teleport\"}".into()],
        "unreadable message",
    );
    expect_violation(&["not json".into()], "unreadable message");
}

#[test]
fn violation_ends_only_that_session() {
    let h = server();
    let good = {
        let mut c = LineClient::connect(&h);
        c.hello();
        thread::spawn(move || {
            let fs = reach(120);
            let mut n = 0;
            for (i, f) in fs.iter().enumerate() {
                c.send(&frame_msg(i as u64, *f));
                if matches!(c.recv(), Some(ServerMessage::Pose { .. })) {
                    n += 1;
                }
                if i == 20 {
                    thread::sleep(Duration::from_millis(50));
                }
            }
            n
        })
    };
    let mut bad = LineClient::connect(&h);
    bad.send(&frame_msg(0, reach(2)[0]));
    assert!(matches!(bad.recv(), Some(ServerMessage::Error { .. })));
    assert!(bad.recv().is_none());
    assert_eq!(good.join().unwrap(), 120);
    assert!(h.is_running());
}

#[test]
fn missing_joint_is_a_side_error_not_a_violation() {
    let h = server();
    let mut c = LineClient::connect(&h);
    c.hello();
    c.send(&ClientMessage::SetParams {
        seq: None,
        params: json!({"technique": "direct"}),
    });
    c.recv().unwrap();
    let fs = reach(3);
    let mut broken = fs[1];
    broken.right.as_mut().unwrap().joints.remove(Joint::IndexTip);
    c.send(&frame_msg(1, fs[0]));
    c.recv().unwrap();
    c.send(&frame_msg(2, broken));
    match c.recv().unwrap() {
        ServerMessage::Pose { seq, sides, .. } => {
            assert_eq!(seq, 2);
            assert!(matches!(&sides[0], SideReply::Error { side: Side::Right, error } if error.contains("index_tip")));
        }
        other => panic!("{other:?}"),
    }
    c.send(&frame_msg(3, fs[2]));
    assert_eq!(pose_output(&c.recv().unwrap()).0, 3);
}

#[test]
fn events_follow_their_pose() {
    let config = Arc::new(ServerConfig::default());
    let mut s = Session::new(config);
    s.handle(ClientMessage::Hello {
        client: None,
        calibration: None,
    });
    let fs = reach(3);
    let mut pinched = fs[1];
    {
        let hand = pinched.right.as_mut().unwrap();
        let pip = hand.joints.get(Joint::MiddlePip).unwrap();
        hand.joints.set(Joint::ThumbTip, pip + Vec3::new(0.005, 0.0, 0.0));
    }
    s.handle(frame_msg(1, fs[0]));
    let reply = s.handle(frame_msg(2, pinched));
    assert_eq!(reply.messages.len(), 2);
    assert!(matches!(reply.messages[0], ServerMessage::Pose { seq: 2, .. }));
    match &reply.messages[1] {
        ServerMessage::Event { seq, event } => {
            assert_eq!(*seq, 2);
            assert_eq!(event.side, Side::Right);
        }
        other => panic!("{other:?}"),
    }
    let text = encode(&reply.messages[1]).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["kind"], "event");
    assert_eq!(v["gesture"], "thumb_button");
    assert_eq!(v["event"], "press");
}

#[test]
fn hello_calibration_applies_to_that_session() {
    let mut s = Session::new(Arc::new(ServerConfig::default()));
    let calibration = BodyCalibration {
        arm_length: 0.7,
        ..BodyCalibration::default()
    };
    match &s
        .handle(ClientMessage::Hello {
            client: None,
            calibration: Some(calibration),
        })
        .messages[0]
    {
        ServerMessage::Hello { calibration: c, .. } => assert_eq!(c.arm_length, 0.7),
        other => panic!("{other:?}"),
    }
    let mut other = Session::new(Arc::new(ServerConfig::default()));
    let reply = other.handle_line(r#"{"kind": "hello", "calibration": {"arm_length": -1}}"#);
    assert!(reply.close);
}

#[test]
fn websocket_clients_get_the_same_replies() {
    use tungstenite::Message;

    let h = server();
    let (mut ws, _) = tungstenite::connect(format!("ws://{}/", h.addr)).unwrap();
    let send = |ws: &mut tungstenite::WebSocket<_>, m: &ClientMessage| {
        ws.send(Message::text(encode(m).unwrap())).unwrap();
    };
    let recv = |ws: &mut tungstenite::WebSocket<tungstenite::stream::MaybeTlsStream<TcpStream>>| -> ServerMessage {
        loop {
            match ws.read().unwrap() {
                Message::Text(t) => return serde_json::from_str(&t).unwrap(),
                _ => continue,
            }
        }
    };
    send(
        &mut ws,
        &ClientMessage::Hello {
            client: Some("browser".into()),
            calibration: None,
        },
    );
    assert!(matches!(recv(&mut ws), ServerMessage::Hello { .. }));

    let fs = reach(60);
    let mut reference = Session::new(Arc::new(ServerConfig::default()));
    reference.handle(ClientMessage::Hello {
        client: None,
        calibration: None,
    });
    for (i, f) in fs.iter().enumerate() {
        let msg = frame_msg(i as u64, *f);
        send(&mut ws, &msg);
        let got = recv(&mut ws);
        let want = reference.handle_line(&encode(&msg).unwrap()).messages.remove(0);
        assert_eq!(encode(&got).unwrap(), encode(&want).unwrap());
    }
    send(&mut ws, &ClientMessage::MetricsSnapshot);
    match recv(&mut ws) {
        ServerMessage::MetricsSnapshot { frames, .. } => assert_eq!(frames, 60),
        other => panic!("{other:?}"),
    }
    send(&mut ws, &frame_msg(0, fs[0]));
    assert!(matches!(recv(&mut ws), ServerMessage::Error { .. }));
    ws.close(None).ok();
}
