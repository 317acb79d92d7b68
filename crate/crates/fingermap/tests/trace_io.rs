use std::io::Cursor;

use fingermap::commands::map_trace;
use fingermap::trace_io::{
    encode, read_layout, read_results_json, read_tasks, read_trace, round_sig, write_layout, write_results_csv,
    write_results_json, write_tasks, write_trace, Results, Trace, TraceError, TraceHeader, FORMAT_VERSION,
};
use fingermap_core::metrics::{summarize, Summary, TaskRecord};
use fingermap_core::task_lab::{
    generate_layout, make_task_sequence, synth_reach, DistanceClass, HandModel, LayoutConfig, SynthTraceSpec, TaskSpec,
};
use fingermap_core::{BodyCalibration, MappingParams, Pose, Rotation, Side, Technique, Vec3};
use proptest::prelude::*;

fn sample_trace() -> Trace {
    let spec = SynthTraceSpec::Reach {
        side: Side::Right,
        hmd: Pose::from_position(Vec3::new(0.0, 1.2, 0.0)),
        start: Vec3::new(0.2, 0.9, 0.2),
        end: Vec3::new(0.05, 1.05, 0.42),
        wrist_rotation: Rotation::from_axis_angle(Vec3::new(0.2, 1.0, 0.1), 0.3),
        duration: 0.5,
        rate: 60.0,
        r_start: 1.0,
        r_end: 0.4,
        t0: 0.0,
    };
    let frames = synth_reach(&spec, &HandModel::default()).unwrap();
    Trace::from_frames(
        TraceHeader::new(BodyCalibration::default(), MappingParams::default()),
        frames,
    )
}

fn to_bytes(trace: &Trace) -> Vec<u8> {
    let mut buf = Vec::new();
    write_trace(&mut buf, trace).unwrap();
    buf
}

/// Within half a unit in the ninth significant digit.
fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 5e-9 * a.abs()
}

#[test]
fn round_trip_keeps_frames_and_bytes() {
    let trace = sample_trace();
    let bytes = to_bytes(&trace);
    let back = read_trace(Cursor::new(&bytes)).unwrap();
    assert_eq!(back.header, trace.header);
    assert_eq!(back.records.len(), trace.records.len());
    for (a, b) in trace.frames().zip(back.frames()) {
        assert!(close(a.t, b.t));
        let (ha, hb) = (a.right.unwrap(), b.right.unwrap());
        for (j, p) in ha.joints.iter() {
            let q = hb.joints.get(j).unwrap();
            assert!(close(p.x, q.x) && close(p.y, q.y) && close(p.z, q.z), "{j:?}");
        }
        assert!(close(ha.wrist.rotation.w, hb.wrist.rotation.w));
    }
    assert_eq!(to_bytes(&back), bytes);
}

#[test]
fn same_input_same_bytes() {
    assert_eq!(to_bytes(&sample_trace()), to_bytes(&sample_trace()));
}

#[test]
fn line_numbers_count_the_header() {
    let trace = sample_trace();
    let back = read_trace(Cursor::new(to_bytes(&trace))).unwrap();
    assert_eq!(back.records[0].line, 2);
    assert_eq!(back.records[5].line, 7);
}

#[test]
fn decreasing_time_reports_its_line() {
    let mut trace = sample_trace();
    // Line 7 holds the sixth frame.
    trace.records[5].frame.t = trace.records[4].frame.t - 0.001;
    let err = read_trace(Cursor::new(to_bytes(&trace))).unwrap_err();
    assert!(matches!(err, TraceError::NonMonotonicTime { line: 7 }), "{err}");
}

#[test]
fn repeated_time_is_rejected() {
    let mut trace = sample_trace();
    trace.records[3].frame.t = trace.records[2].frame.t;
    let err = read_trace(Cursor::new(to_bytes(&trace))).unwrap_err();
    assert!(matches!(err, TraceError::NonMonotonicTime { line: 5 }));
}

#[test]
fn malformed_lines_are_located() {
    let bytes = to_bytes(&sample_trace());
    let text = String::from_utf8(bytes).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[3] = "{\"t\": 1.0, \"hmd\": ";
    let err = read_trace(Cursor::new(lines.join("\n"))).unwrap_err();
    assert!(matches!(err, TraceError::MalformedFrame { line: 4, .. }), "{err}");

    let err = read_trace(Cursor::new("not json\n")).unwrap_err();
    assert!(matches!(err, TraceError::MalformedHeader(_)));
    let err = read_trace(Cursor::new("")).unwrap_err();
    assert!(matches!(err, TraceError::MalformedHeader(_)));
}

#[test]
fn other_versions_are_refused() {
    let mut trace = sample_trace();
    trace.header.version = FORMAT_VERSION + 1;
    let err = read_trace(Cursor::new(to_bytes(&trace))).unwrap_err();
    assert!(matches!(err, TraceError::MalformedHeader(m) if m.contains("version")));
}

#[test]
fn unknown_fields_survive_round_trip() {
    let bytes = to_bytes(&sample_trace());
    let text = String::from_utf8(bytes).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut header: serde_json::Value = serde_json::from_str(&lines[0]).unwrap();
    header["recorder"] = serde_json::json!({"device": "quest-3", "fps": 72});
    lines[0] = header.to_string();
    let mut frame: serde_json::Value = serde_json::from_str(&lines[2]).unwrap();
    frame["confidence"] = serde_json::json!(0.75);
    lines[2] = frame.to_string();
    let edited = lines.join("\n") + "\n";

    let trace = read_trace(Cursor::new(&edited)).unwrap();
    assert_eq!(trace.header.extra["recorder"]["device"], "quest-3");
    assert_eq!(trace.records[1].extra["confidence"], 0.75);
    let out = String::from_utf8(to_bytes(&trace)).unwrap();
    let h: serde_json::Value = serde_json::from_str(out.lines().next().unwrap()).unwrap();
    assert_eq!(h["recorder"]["fps"], 72);
    let f: serde_json::Value = serde_json::from_str(out.lines().nth(2).unwrap()).unwrap();
    assert_eq!(f["confidence"], 0.75);
}

#[test]
fn extras_carry_through_mapping() {
    let mut trace = sample_trace();
    trace.records[0]
        .extra
        .insert("note".into(), serde_json::json!("calibration pose"));
    let (mapped, _) = map_trace(&trace, BodyCalibration::default(), MappingParams::default(), Vec::new()).unwrap();
    assert_eq!(mapped.records[0].extra["note"], "calibration pose");
    let back = read_trace(Cursor::new(to_bytes(&mapped))).unwrap();
    assert_eq!(back.records[0].mapped.len(), 1);
    assert_eq!(back.records[0].mapped[0].side, Side::Right);
}

#[test]
fn floats_use_nine_significant_digits() {
    assert_eq!(round_sig(0.123456789123), 0.123456789);
    assert_eq!(round_sig(1.0 / 3.0), 0.333333333);
    assert_eq!(round_sig(-2.0e-7 / 3.0), -6.66666667e-8);
    assert_eq!(round_sig(0.22 * 1.7), 0.374);
    assert_eq!(encode(&[0.1 + 0.2, 1.0]).unwrap(), "[0.3,1.0]");
}

#[test]
fn layout_file_round_trip_is_exact() {
    let layout = generate_layout(1.7, LayoutConfig::default()).unwrap();
    let mut buf = Vec::new();
    write_layout(&mut buf, &layout).unwrap();
    let back = read_layout(Cursor::new(&buf)).unwrap();
    assert_eq!(back.targets.len(), 18);
    for t in &back.targets {
        assert!(t.position.z == 0.374 || t.position.z == 0.748, "{}", t.position.z);
    }
    let mut again = Vec::new();
    write_layout(&mut again, &back).unwrap();
    assert_eq!(buf, again);
}

#[test]
fn task_file_round_trip() {
    let layout = generate_layout(1.7, LayoutConfig::default()).unwrap();
    let tasks = make_task_sequence(&layout, 30, 11).unwrap();
    let mut buf = Vec::new();
    write_tasks(&mut buf, &tasks, 11).unwrap();
    assert!(String::from_utf8_lossy(&buf).contains("\"distance_class\""));
    assert_eq!(read_tasks(Cursor::new(&buf)).unwrap(), tasks);
}

fn record(i: usize, success: bool) -> TaskRecord {
    TaskRecord {
        task: TaskSpec {
            start_id: i,
            end_id: i + 1,
            class: DistanceClass::Long,
        },
        start_t: i as f64,
        end_t: i as f64 + 1.25,
        physical_wrist_path: 0.2,
        virtual_pointer_path: 0.41,
        target_distance: 0.4,
        success,
    }
}

#[test]
fn results_csv_has_header_and_one_row_per_task() {
    let records: Vec<_> = (0..5).map(|i| record(i, i != 3)).collect();
    let mut buf = Vec::new();
    write_results_csv(&mut buf, &records).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    assert!(lines[0].starts_with("task,start_id,end_id,distance_class,success"));
    assert_eq!(lines[1], "0,0,1,long,true,0,1.25,1.25,0.4,0.2,0.41,0.5,1.025");
    assert!(lines[4].contains(",false,"));
}

#[test]
fn results_json_round_trip() {
    let records: Vec<_> = (0..4).map(|i| record(i, true)).collect();
    let results = Results {
        version: FORMAT_VERSION,
        technique: Technique::Direct,
        side: Side::Left,
        summary: summarize(&records, false),
        tasks: records,
        interaction_volume: None,
        confinement: None,
    };
    let mut buf = Vec::new();
    write_results_json(&mut buf, &results).unwrap();
    let back = read_results_json(Cursor::new(&buf)).unwrap();
    assert_eq!(back, results);
    assert_ne!(back.summary, Summary::default());
}

fn rotation() -> impl Strategy<Value = Rotation> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter("degenerate", |(w, x, y, z)| w * w + x * x + y * y + z * z > 1e-3)
        .prop_map(|(w, x, y, z)| Rotation::new(w, x, y, z))
}

proptest! {
    #[test]
    fn rotation_encoding_is_a_fixed_point(q in rotation()) {
        let text = serde_json::to_string(&q).unwrap();
        let back: Rotation = serde_json::from_str(&text).unwrap();
        prop_assert!(back.w >= 0.0);
        prop_assert_eq!(back.to_array(), q.canonical().to_array());
        prop_assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }

    #[test]
    fn canonical_encoding_round_trips_bit_identically(q in rotation()) {
        let once = encode(&q).unwrap();
        let back: Rotation = serde_json::from_str(&once).unwrap();
        prop_assert_eq!(encode(&back).unwrap(), once);
    }

    #[test]
    fn rounding_is_idempotent(x in -1e6..1e6f64) {
        let r = round_sig(x);
        prop_assert_eq!(round_sig(r), r);
        prop_assert!((r - x).abs() <= 5e-9 * x.abs());
    }
}
