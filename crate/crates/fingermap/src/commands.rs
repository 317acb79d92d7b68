//! The work behind each CLI subcommand, free of argument parsing so tests
//! and the service can call it directly.

use anyhow::{bail, Context, Result};
use fingermap_core::mapping::FrameOutput;
use fingermap_core::metrics::{
    confinement_violations, interaction_volume, segment_tasks, summarize, Aabb, TrackSample,
};
use fingermap_core::task_lab::{synth_task_suite, SuiteConfig, Target, TargetLayout, TaskSpec};
use fingermap_core::{BodyCalibration, HandFrame, Joint, MappingParams, MappingSession, Side, Technique};
use log::{info, warn};

use crate::trace_io::{Results, Trace, TraceHeader, TraceRecord, FORMAT_VERSION};

/// A hand the mapper could not process.
#[derive(Debug, Clone, PartialEq)]
pub struct Skipped {
    pub line: usize,
    pub side: Side,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MapReport {
    pub frames_in: usize,
    pub frames_out: usize,
    pub hands_mapped: usize,
    pub events: usize,
    pub skipped: Vec<Skipped>,
}

impl std::fmt::Display for MapReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "frames in: {}, frames out: {}, hands mapped: {}, events: {}, hands skipped: {}",
            self.frames_in,
            self.frames_out,
            self.hands_mapped,
            self.events,
            self.skipped.len()
        )
    }
}

/// Replays `input` through a fresh mapping session.
///
/// The output header is the input header with `calibration`, `params` and
/// `technique` replaced; `created_at` and unknown fields are kept so the
/// result depends only on the inputs. Hands that fail to map are reported
/// and left out; a frame with nothing left is dropped.
pub fn map_trace(
    input: &Trace,
    calibration: BodyCalibration,
    params: MappingParams,
    targets: Vec<Target>,
) -> Result<(Trace, MapReport)> {
    let mut session = MappingSession::new(calibration, params).context("invalid mapping parameters")?;
    session.set_targets(targets);
    let header = TraceHeader {
        calibration,
        params,
        technique: params.technique,
        ..input.header.clone()
    };
    let mut report = MapReport {
        frames_in: input.records.len(),
        ..MapReport::default()
    };
    let mut records = Vec::with_capacity(input.records.len());
    for rec in &input.records {
        let out = session.process(&rec.frame);
        let mapped = collect_outputs(&out, rec.line, &mut report.skipped);
        if mapped.is_empty() && out.events.is_empty() {
            continue;
        }
        report.hands_mapped += mapped.len();
        report.events += out.events.len();
        records.push(TraceRecord {
            line: 0,
            frame: rec.frame,
            mapped,
            events: out.events,
            extra: rec.extra.clone(),
        });
    }
    report.frames_out = records.len();
    Ok((Trace { header, records }, report))
}

fn collect_outputs(
    out: &FrameOutput,
    line: usize,
    skipped: &mut Vec<Skipped>,
) -> Vec<fingermap_core::mapping::SideOutput> {
    let mut mapped = Vec::new();
    for (side, result) in &out.sides {
        match result {
            Ok(o) => mapped.push(*o),
            Err(e) => {
                warn!("line {line}: {} hand skipped: {e}", side.name());
                skipped.push(Skipped {
                    line,
                    side: *side,
                    message: e.to_string(),
                });
            }
        }
    }
    mapped
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsOptions {
    pub side: Side,
    pub drop_outliers: bool,
    pub confinement: Option<Aabb>,
    /// Resampling period for the interaction volume, seconds.
    pub volume_period: f64,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        MetricsOptions {
            side: Side::Right,
            drop_outliers: false,
            confinement: None,
            volume_period: 1.0,
        }
    }
}

pub fn check_task_references(layout: &TargetLayout, tasks: &[TaskSpec]) -> Result<()> {
    for (i, t) in tasks.iter().enumerate() {
        for id in [t.start_id, t.end_id] {
            if layout.target(id).is_none() {
                bail!("task {i} references target {id}, which is not in the layout");
            }
        }
    }
    Ok(())
}

/// Task records, interaction volume and confinement counts for a mapped
/// trace. The pointer path pauses on targets only for ray casting.
pub fn compute_metrics(
    trace: &Trace,
    layout: &TargetLayout,
    tasks: &[TaskSpec],
    opts: &MetricsOptions,
) -> Result<Results> {
    check_task_references(layout, tasks)?;
    let side = opts.side;
    let samples: Vec<TrackSample> = trace
        .records
        .iter()
        .filter_map(|r| {
            let o = r.output(side)?;
            let hand = r.frame.hand(side)?;
            Some(TrackSample {
                t: r.frame.t,
                physical_wrist: hand.wrist.position,
                pointer: o.pointer,
                pointer_target: o.pointer_target,
            })
        })
        .collect();
    let pause = trace.header.technique == Technique::RayCast;
    let records = if tasks.is_empty() {
        Vec::new()
    } else {
        segment_tasks(&samples, tasks, layout, pause)?
    };
    let tips: Vec<_> = trace
        .records
        .iter()
        .filter_map(|r| Some((r.frame.t, r.frame.hand(side)?.joints.get(Joint::IndexTip)?)))
        .collect();
    let interaction_volume = if tips.is_empty() {
        None
    } else {
        Some(interaction_volume(&tips, opts.volume_period)?)
    };
    let confinement = opts.confinement.map(|b| {
        let frames: Vec<HandFrame> = trace.frames().copied().collect();
        confinement_violations(&frames, &b)
    });
    Ok(Results {
        version: FORMAT_VERSION,
        technique: trace.header.technique,
        side,
        summary: summarize(&records, opts.drop_outliers),
        tasks: records,
        interaction_volume,
        confinement,
    })
}

/// Physical trace of the scripted operator for `technique`.
pub fn synth_suite_trace(
    layout: &TargetLayout,
    tasks: &[TaskSpec],
    calibration: BodyCalibration,
    params: MappingParams,
    suite: &SuiteConfig,
) -> Result<Trace> {
    check_task_references(layout, tasks)?;
    let frames = synth_task_suite(layout, tasks, params.technique, &calibration, &params, suite)?;
    Ok(Trace::from_frames(TraceHeader::new(calibration, params), frames))
}

/// Map and measure each technique on the same layout and tasks. A technique
/// without a recorded trace in `recorded` gets a scripted one.
#[allow(clippy::too_many_arguments)]
pub fn compare(
    layout: &TargetLayout,
    tasks: &[TaskSpec],
    techniques: &[Technique],
    recorded: &[(Technique, Trace)],
    calibration: BodyCalibration,
    base: MappingParams,
    suite: &SuiteConfig,
    opts: &MetricsOptions,
) -> Result<Vec<Results>> {
    let mut out = Vec::with_capacity(techniques.len());
    for &technique in techniques {
        let params = MappingParams { technique, ..base };
        let physical = match recorded.iter().find(|(t, _)| *t == technique) {
            Some((_, trace)) => trace.clone(),
            None => synth_suite_trace(layout, tasks, calibration, params, suite)?,
        };
        let (mapped, report) = map_trace(&physical, calibration, params, layout.targets.clone())?;
        info!("{}: {report}", technique.name());
        let opts = MetricsOptions {
            side: suite.side,
            ..*opts
        };
        out.push(compute_metrics(&mapped, layout, tasks, &opts)?);
    }
    Ok(out)
}

/// Side-by-side text table of [`compare`] results.
pub fn comparison_table(results: &[Results]) -> String {
    let mut s = format!(
        "{:<18} {:>6} {:>9} {:>9} {:>10} {:>10} {:>12} {:>11}\n",
        "technique", "tasks", "success", "time_s", "wrist_ratio", "ptr_ratio", "volume_m3", "violations"
    );
    for r in results {
        let volume = r
            .interaction_volume
            .map_or("-".to_string(), |v| format!("{:.4}", v.volume));
        let violations = r.confinement.as_ref().map_or("-".to_string(), |c| c.count.to_string());
        s.push_str(&format!(
            "{:<18} {:>6} {:>9} {:>9.3} {:>10.3} {:>10.3} {:>12} {:>11}\n",
            r.technique.name(),
            r.summary.tasks,
            r.summary.successful,
            r.summary.mean_task_time,
            r.summary.mean_physical_ratio,
            r.summary.mean_virtual_ratio,
            volume,
            violations
        ));
    }
    s
}
