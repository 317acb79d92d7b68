//! Evaluation measures over replayed traces: path lengths and their ratios
//! to target distance, fingertip interaction volume, task segmentation and
//! confinement-box excursions.

use alloc::vec::Vec;

use crate::geometry::Vec3;
use crate::hand::HandFrame;
use crate::math;
use crate::task_lab::{Target, TargetLayout, TaskSpec};
use crate::Error;

/// Sum of consecutive Euclidean distances.
pub fn path_length(points: &[Vec3]) -> f64 {
    points.windows(2).map(|w| w[0].distance(w[1])).sum()
}

/// One time step of the streams a task is measured on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackSample {
    pub t: f64,
    pub physical_wrist: Vec3,
    pub pointer: Vec3,
    /// Target the pointer rests on by a ray hit. Such a sample counts as
    /// inside that target whatever its coordinates.
    pub pointer_target: Option<usize>,
}

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskRecord {
    pub task: TaskSpec,
    pub start_t: f64,
    pub end_t: f64,
    pub physical_wrist_path: f64,
    pub virtual_pointer_path: f64,
    pub target_distance: f64,
    pub success: bool,
}

impl TaskRecord {
    pub fn task_time(&self) -> f64 {
        self.end_t - self.start_t
    }
}

/// `(physical wrist path, virtual pointer path)` over target distance.
pub fn path_ratio(record: &TaskRecord) -> (f64, f64) {
    (
        record.physical_wrist_path / record.target_distance,
        record.virtual_pointer_path / record.target_distance,
    )
}

/// Splits a replay into task records.
///
/// A task ends on the first sample with the pointer inside its second
/// target that follows a visit to the first. It starts where the pointer
/// last entered the first target before that, so a detour that leaves the
/// first target and comes back is not counted. Samples outside a task do
/// not count toward its paths. When `pause_on_target` is
/// set, pointer motion between samples that sit on a target is skipped.
/// Tasks the trace never completes come back with `success == false`.
pub fn segment_tasks(
    samples: &[TrackSample],
    tasks: &[TaskSpec],
    layout: &TargetLayout,
    pause_on_target: bool,
) -> Result<Vec<TaskRecord>, Error> {
    let mut records = Vec::with_capacity(tasks.len());
    let mut cursor = 0usize;
    let last_t = samples.last().map_or(0.0, |s| s.t);
    for task in tasks {
        let first = layout
            .target(task.start_id)
            .ok_or(Error::InvalidParameter("task references an unknown target"))?;
        let second = layout
            .target(task.end_id)
            .ok_or(Error::InvalidParameter("task references an unknown target"))?;
        let target_distance = first.position.distance(second.position);

        let on = |target: &Target, i: usize| {
            samples[i].pointer_target == Some(target.id) || target.contains(samples[i].pointer)
        };
        let inside_first = |i: usize| on(first, i);
        let Some(first_visit) = (cursor..samples.len()).find(|&i| inside_first(i)) else {
            cursor = samples.len();
            records.push(TaskRecord {
                task: *task,
                start_t: last_t,
                end_t: last_t,
                physical_wrist_path: 0.0,
                virtual_pointer_path: 0.0,
                target_distance,
                success: false,
            });
            continue;
        };
        let end = (first_visit + 1..samples.len()).find(|&i| on(second, i));
        let (stop, success) = match end {
            Some(e) => (e, true),
            None => (samples.len() - 1, false),
        };
        let start = (first_visit + 1..stop)
            .rev()
            .find(|&i| inside_first(i) && !inside_first(i - 1))
            .unwrap_or(first_visit);
        let span = &samples[start..=stop];
        let wrist_path = span
            .windows(2)
            .map(|w| w[0].physical_wrist.distance(w[1].physical_wrist))
            .sum();
        let pointer_path = span
            .windows(2)
            .filter(|w| !pause_on_target || (w[0].pointer_target.is_none() && w[1].pointer_target.is_none()))
            .map(|w| w[0].pointer.distance(w[1].pointer))
            .sum();
        records.push(TaskRecord {
            task: *task,
            start_t: samples[start].t,
            end_t: samples[stop].t,
            physical_wrist_path: wrist_path,
            virtual_pointer_path: pointer_path,
            target_distance,
            success,
        });
        cursor = stop + 1;
    }
    Ok(records)
}

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Aabb {
        Aabb { min, max }
    }

    pub fn contains(&self, p: Vec3) -> bool {
        p.x >= self.min.x
            && p.y >= self.min.y
            && p.z >= self.min.z
            && p.x <= self.max.x
            && p.y <= self.max.y
            && p.z <= self.max.z
    }

    pub fn volume(&self) -> f64 {
        let e = self.max - self.min;
        e.x * e.y * e.z
    }

    pub fn is_valid(&self) -> bool {
        self.min.x <= self.max.x && self.min.y <= self.max.y && self.min.z <= self.max.z
    }
}

pub fn bounding_box(points: &[Vec3]) -> Option<Aabb> {
    let first = *points.first()?;
    Some(
        points
            .iter()
            .fold(Aabb::new(first, first), |b, p| Aabb::new(b.min.min(*p), b.max.max(*p))),
    )
}

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeReport {
    pub min: Vec3,
    pub max: Vec3,
    pub volume: f64,
    pub samples: usize,
}

/// Axis-aligned bounding box of fingertip positions taken every `period`
/// seconds (nearest recorded sample to each tick).
pub fn interaction_volume(samples: &[(f64, Vec3)], period: f64) -> Result<VolumeReport, Error> {
    if samples.is_empty() {
        return Err(Error::EmptyTrace);
    }
    if !(period > 0.0) {
        return Err(Error::InvalidParameter("sample period must be positive"));
    }
    let t0 = samples[0].0;
    let t_end = samples[samples.len() - 1].0;
    let ticks = math::floor((t_end - t0) / period + 1e-9) as usize + 1;
    let mut picked = Vec::with_capacity(ticks);
    let mut j = 0usize;
    for k in 0..ticks {
        let tick = t0 + k as f64 * period;
        while j + 1 < samples.len() && (samples[j + 1].0 - tick).abs() <= (samples[j].0 - tick).abs() {
            j += 1;
        }
        picked.push(samples[j].1);
    }
    let b = bounding_box(&picked).ok_or(Error::EmptyTrace)?;
    Ok(VolumeReport {
        min: b.min,
        max: b.max,
        volume: b.volume(),
        samples: picked.len(),
    })
}

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfinementReport {
    pub count: usize,
    /// `(first, last)` timestamps of each excursion.
    pub intervals: Vec<(f64, f64)>,
}

/// Counts maximal runs of frames in which any tracked physical wrist or
/// finger joint lies outside `bounds`.
pub fn confinement_violations(frames: &[HandFrame], bounds: &Aabb) -> ConfinementReport {
    let outside = |f: &HandFrame| {
        [f.left.as_ref(), f.right.as_ref()]
            .into_iter()
            .flatten()
            .any(|h| !bounds.contains(h.wrist.position) || h.joints.iter().any(|(_, p)| !bounds.contains(p)))
    };
    let mut report = ConfinementReport::default();
    let mut open: Option<(f64, f64)> = None;
    for f in frames {
        if outside(f) {
            open = Some(match open {
                Some((s, _)) => (s, f.t),
                None => (f.t, f.t),
            });
        } else if let Some(iv) = open.take() {
            report.intervals.push(iv);
        }
    }
    if let Some(iv) = open {
        report.intervals.push(iv);
    }
    report.count = report.intervals.len();
    report
}

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Summary {
    pub tasks: usize,
    pub successful: usize,
    /// Successful tasks kept after outlier removal.
    pub included: usize,
    pub mean_task_time: f64,
    pub mean_physical_ratio: f64,
    pub mean_virtual_ratio: f64,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = if xs.len() > 1 {
        xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, math::sqrt(v))
}

/// Means over successful tasks. With `drop_outliers`, tasks whose time or
/// either path ratio lies more than three standard deviations from the mean
/// are excluded first.
pub fn summarize(records: &[TaskRecord], drop_outliers: bool) -> Summary {
    let ok: Vec<&TaskRecord> = records.iter().filter(|r| r.success).collect();
    let times: Vec<f64> = ok.iter().map(|r| r.task_time()).collect();
    let phys: Vec<f64> = ok.iter().map(|r| path_ratio(r).0).collect();
    let virt: Vec<f64> = ok.iter().map(|r| path_ratio(r).1).collect();
    let keep: Vec<usize> = if drop_outliers {
        let stats = [mean_sd(&times), mean_sd(&phys), mean_sd(&virt)];
        (0..ok.len())
            .filter(|&i| {
                [times[i], phys[i], virt[i]]
                    .iter()
                    .zip(&stats)
                    .all(|(x, (m, sd))| (x - m).abs() <= 3.0 * sd)
            })
            .collect()
    } else {
        (0..ok.len()).collect()
    };
    let mean = |xs: &[f64]| {
        if keep.is_empty() {
            0.0
        } else {
            keep.iter().map(|&i| xs[i]).sum::<f64>() / keep.len() as f64
        }
    };
    Summary {
        tasks: records.len(),
        successful: ok.len(),
        included: keep.len(),
        mean_task_time: mean(&times),
        mean_physical_ratio: mean(&phys),
        mean_virtual_ratio: mean(&virt),
    }
}
