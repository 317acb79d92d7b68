//! Line-delimited JSON traces plus the layout, task and results files.
//!
//! Every writer goes through [`encode`], which sorts object keys and rounds
//! floats to 9 significant digits, so equal inputs give equal bytes.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};
use std::path::Path;

use chrono::DateTime;
use fingermap_core::mapping::{GestureEvent, SideOutput};
use fingermap_core::metrics::{path_ratio, ConfinementReport, Summary, TaskRecord, VolumeReport};
use fingermap_core::task_lab::{TargetLayout, TaskSpec};
use fingermap_core::{BodyCalibration, HandFrame, MappingParams, Side, Technique};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("line {line}: malformed frame: {message}")]
    MalformedFrame { line: usize, message: String },
    #[error("line {line}: timestamp does not increase")]
    NonMonotonicTime { line: usize },
    #[error("malformed {what}: {message}")]
    Malformed { what: &'static str, message: String },
    #[error("cannot encode: {0}")]
    Encode(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Rounds to 9 significant digits. Idempotent.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            *v = Value::from(round_sig(n.as_f64().unwrap_or(f64::NAN)));
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Canonical single-line JSON: sorted keys, 9-digit floats.
pub fn encode<T: Serialize + ?Sized>(value: &T) -> Result<String, serde_json::Error> {
    let mut v = serde_json::to_value(value)?;
    round_value(&mut v);
    serde_json::to_string(&v)
}

/// RFC 3339 timestamp for new files: `SOURCE_DATE_EPOCH` when set, else
/// the Unix epoch, so generated files stay reproducible.
pub fn reproducible_timestamp() -> String {
    let secs = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .unwrap_or(0);
    DateTime::from_timestamp(secs, 0)
        .unwrap_or_default()
        .to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub version: u32,
    pub created_at: String,
    pub calibration: BodyCalibration,
    pub params: MappingParams,
    pub technique: Technique,
    /// Fields this reader does not know; written back unchanged.
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl TraceHeader {
    pub fn new(calibration: BodyCalibration, params: MappingParams) -> TraceHeader {
        TraceHeader {
            version: FORMAT_VERSION,
            created_at: reproducible_timestamp(),
            calibration,
            params,
            technique: params.technique,
            extra: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideError {
    pub side: Side,
    pub message: String,
}

/// One frame line. Raw traces carry only the frame; mapped traces add the
/// per-hand outputs and trigger events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// 1-based line in the file it was read from (0 when built in memory).
    #[serde(skip)]
    pub line: usize,
    #[serde(flatten)]
    pub frame: HandFrame,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mapped: Vec<SideOutput>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<GestureEvent>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl TraceRecord {
    pub fn new(frame: HandFrame) -> TraceRecord {
        TraceRecord {
            line: 0,
            frame,
            mapped: Vec::new(),
            events: Vec::new(),
            extra: BTreeMap::new(),
        }
    }

    pub fn output(&self, side: Side) -> Option<&SideOutput> {
        self.mapped.iter().find(|o| o.side == side)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn from_frames(header: TraceHeader, frames: impl IntoIterator<Item = HandFrame>) -> Trace {
        Trace {
            header,
            records: frames.into_iter().map(TraceRecord::new).collect(),
        }
    }

    pub fn frames(&self) -> impl Iterator<Item = &HandFrame> + '_ {
        self.records.iter().map(|r| &r.frame)
    }
}

pub fn read_trace<R: BufRead>(reader: R) -> Result<Trace, TraceError> {
    let mut header: Option<TraceHeader> = None;
    let mut records = Vec::new();
    let mut last_t: Option<f64> = None;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let Some(_) = header else {
            let h: TraceHeader = serde_json::from_str(&line).map_err(|e| TraceError::MalformedHeader(e.to_string()))?;
            if h.version != FORMAT_VERSION {
                return Err(TraceError::MalformedHeader(format!(
                    "unsupported version {}",
                    h.version
                )));
            }
            header = Some(h);
            continue;
        };
        let mut record: TraceRecord = serde_json::from_str(&line).map_err(|e| TraceError::MalformedFrame {
            line: line_no,
            message: e.to_string(),
        })?;
        if !record.frame.t.is_finite() {
            return Err(TraceError::MalformedFrame {
                line: line_no,
                message: "non-finite timestamp".into(),
            });
        }
        if last_t.is_some_and(|prev| record.frame.t <= prev) {
            return Err(TraceError::NonMonotonicTime { line: line_no });
        }
        last_t = Some(record.frame.t);
        record.line = line_no;
        records.push(record);
    }
    let header = header.ok_or_else(|| TraceError::MalformedHeader("empty file".into()))?;
    Ok(Trace { header, records })
}

pub fn write_trace<W: Write>(mut w: W, trace: &Trace) -> Result<(), TraceError> {
    writeln!(w, "{}", encode(&trace.header)?)?;
    for r in &trace.records {
        writeln!(w, "{}", encode(r)?)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_file(path: &Path) -> Result<Trace, TraceError> {
    read_trace(io::BufReader::new(std::fs::File::open(path)?))
}

pub fn write_trace_file(path: &Path, trace: &Trace) -> Result<(), TraceError> {
    write_trace(io::BufWriter::new(std::fs::File::create(path)?), trace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutFile {
    pub version: u32,
    pub created_at: String,
    #[serde(flatten)]
    pub layout: TargetLayout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskFile {
    pub version: u32,
    pub created_at: String,
    pub seed: u64,
    pub tasks: Vec<TaskSpec>,
}

fn write_doc<W: Write, T: Serialize>(mut w: W, doc: &T) -> Result<(), TraceError> {
    writeln!(w, "{}", encode(doc)?)?;
    w.flush()?;
    Ok(())
}

fn read_doc<R: io::Read, T: serde::de::DeserializeOwned>(r: R, what: &'static str) -> Result<T, TraceError> {
    serde_json::from_reader(r).map_err(|e| TraceError::Malformed {
        what,
        message: e.to_string(),
    })
}

pub fn write_layout<W: Write>(w: W, layout: &TargetLayout) -> Result<(), TraceError> {
    write_doc(
        w,
        &LayoutFile {
            version: FORMAT_VERSION,
            created_at: reproducible_timestamp(),
            layout: layout.clone(),
        },
    )
}

pub fn read_layout<R: io::Read>(r: R) -> Result<TargetLayout, TraceError> {
    let f: LayoutFile = read_doc(r, "layout")?;
    Ok(f.layout)
}

pub fn write_tasks<W: Write>(w: W, tasks: &[TaskSpec], seed: u64) -> Result<(), TraceError> {
    write_doc(
        w,
        &TaskFile {
            version: FORMAT_VERSION,
            created_at: reproducible_timestamp(),
            seed,
            tasks: tasks.to_vec(),
        },
    )
}

pub fn read_tasks<R: io::Read>(r: R) -> Result<Vec<TaskSpec>, TraceError> {
    let f: TaskFile = read_doc(r, "task list")?;
    Ok(f.tasks)
}

/// Everything `fingermap metrics` reports for one mapped trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Results {
    pub version: u32,
    pub technique: Technique,
    pub side: Side,
    pub summary: Summary,
    pub tasks: Vec<TaskRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interaction_volume: Option<VolumeReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confinement: Option<ConfinementReport>,
}

pub const RESULTS_CSV_COLUMNS: [&str; 13] = [
    "task",
    "start_id",
    "end_id",
    "distance_class",
    "success",
    "start_t",
    "end_t",
    "task_time",
    "target_distance",
    "physical_wrist_path",
    "virtual_pointer_path",
    "physical_ratio",
    "virtual_ratio",
];

fn num(x: f64) -> String {
    round_sig(x).to_string()
}

/// One row per task record after a header row.
pub fn write_results_csv<W: Write>(w: W, records: &[TaskRecord]) -> Result<(), TraceError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(RESULTS_CSV_COLUMNS)?;
    for (i, r) in records.iter().enumerate() {
        let (phys, virt) = path_ratio(r);
        out.write_record([
            i.to_string(),
            r.task.start_id.to_string(),
            r.task.end_id.to_string(),
            r.task.class.name().to_string(),
            r.success.to_string(),
            num(r.start_t),
            num(r.end_t),
            num(r.task_time()),
            num(r.target_distance),
            num(r.physical_wrist_path),
            num(r.virtual_pointer_path),
            num(phys),
            num(virt),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_results_json<W: Write>(w: W, results: &Results) -> Result<(), TraceError> {
    write_doc(w, results)
}

pub fn read_results_json<R: io::Read>(r: R) -> Result<Results, TraceError> {
    read_doc(r, "results")
}

/// Writes CSV or JSON depending on the file extension.
pub fn write_results(path: &Path, results: &Results) -> Result<(), TraceError> {
    let file = io::BufWriter::new(std::fs::File::create(path)?);
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => write_results_csv(file, &results.tasks),
        _ => write_results_json(file, results),
    }
}
