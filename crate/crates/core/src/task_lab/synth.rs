//! Synthetic hand traces: minimum-jerk reaches and a scripted operator that
//! drives each technique through a task sequence.

use alloc::vec::Vec;

use super::{TargetLayout, TaskSpec};
use crate::geometry::{project_onto_plane, Pose, Rotation, Vec3};
use crate::hand::{BodyCalibration, HandFrame, HandSample, Joint, Joints, Side};
use crate::mapping::{estimate_anchors, offset_for_distance, BodyAnchors, MappingParams, Technique};
use crate::math;
use crate::Error;

/// Minimum-jerk position profile `10t^3 - 15t^4 + 6t^5` on `[0, 1]`.
pub fn min_jerk(tau: f64) -> f64 {
    let t = tau.clamp(0.0, 1.0);
    t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
}

/// Right-hand joint offsets in the wrist frame (palm down, fingers along
/// +Z, thumb toward -X). Left hands mirror X.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandModel {
    pub index_mcp: Vec3,
    pub proximal_len: f64,
    pub distal_len: f64,
    pub middle_pip: Vec3,
    pub thumb_open: Vec3,
    pub thumb_pressed: Vec3,
    /// Middle, ring, pinky tips with the hand open.
    pub tips_open: [Vec3; 3],
    /// Middle, ring, pinky tips curled into a grab.
    pub tips_curled: [Vec3; 3],
}

impl Default for HandModel {
    fn default() -> Self {
        HandModel::for_finger_length(BodyCalibration::default().index_finger_length)
    }
}

impl HandModel {
    /// Adult-sized hand whose index finger (MCP to tip) is `length` long.
    pub fn for_finger_length(length: f64) -> HandModel {
        HandModel {
            index_mcp: Vec3::new(-0.02, 0.0, 0.09),
            proximal_len: 0.53 * length,
            distal_len: 0.47 * length,
            middle_pip: Vec3::new(0.0, -0.01, 0.13),
            thumb_open: Vec3::new(-0.06, -0.01, 0.08),
            thumb_pressed: Vec3::new(-0.005, -0.02, 0.13),
            tips_open: [
                Vec3::new(0.0, 0.0, 0.185),
                Vec3::new(0.02, 0.0, 0.175),
                Vec3::new(0.04, 0.0, 0.15),
            ],
            tips_curled: [
                Vec3::new(0.0, -0.04, 0.07),
                Vec3::new(0.02, -0.04, 0.065),
                Vec3::new(0.035, -0.035, 0.06),
            ],
        }
    }

    pub fn finger_length(&self) -> f64 {
        self.proximal_len + self.distal_len
    }

    fn local(side: Side, v: Vec3) -> Vec3 {
        Vec3::new(v.x * side.sign(), v.y, v.z)
    }

    pub fn mcp_position(&self, side: Side, wrist: &Pose) -> Vec3 {
        wrist.transform_point(Self::local(side, self.index_mcp))
    }

    pub fn build(&self, side: Side, wrist: Pose, shape: &HandShape) -> HandSample {
        let at = |v: Vec3| wrist.transform_point(Self::local(side, v));
        let mcp = self.mcp_position(side, &wrist);
        let pip = mcp + shape.proximal_dir * self.proximal_len;
        let tip = pip + shape.distal_dir * self.distal_len;
        let thumb = self.thumb_open.lerp(self.thumb_pressed, shape.thumb_press);
        let curl = |i: usize| self.tips_open[i].lerp(self.tips_curled[i], shape.grab);
        let joints = Joints::new()
            .with(Joint::IndexMcp, mcp)
            .with(Joint::IndexPip, pip)
            .with(Joint::IndexTip, tip)
            .with(Joint::ThumbTip, at(thumb))
            .with(Joint::MiddlePip, at(self.middle_pip))
            .with(Joint::MiddleTip, at(curl(0)))
            .with(Joint::RingTip, at(curl(1)))
            .with(Joint::PinkyTip, at(curl(2)));
        HandSample { wrist, joints }
    }
}

/// Index finger directions (world frame) plus thumb and grab blend weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandShape {
    pub proximal_dir: Vec3,
    pub distal_dir: Vec3,
    pub thumb_press: f64,
    pub grab: f64,
}

impl HandShape {
    pub fn straight(dir: Vec3) -> HandShape {
        HandShape {
            proximal_dir: dir,
            distal_dir: dir,
            thumb_press: 0.0,
            grab: 0.0,
        }
    }

    /// Index finger bent toward `palm_down` so that the tip sits
    /// `tip_distance` from the MCP.
    pub fn curled(model: &HandModel, proximal_dir: Vec3, tip_distance: f64, palm_down: Vec3) -> HandShape {
        let (l1, l2) = (model.proximal_len, model.distal_len);
        let d = tip_distance.clamp((l1 - l2).abs(), l1 + l2);
        let cos_t = ((d * d - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)).clamp(-1.0, 1.0);
        let sin_t = math::sqrt(1.0 - cos_t * cos_t);
        let bend = project_onto_plane(palm_down, proximal_dir)
            .try_normalize()
            .unwrap_or_else(|| proximal_dir.any_orthogonal());
        HandShape {
            proximal_dir,
            distal_dir: proximal_dir * cos_t + bend * sin_t,
            thumb_press: 0.0,
            grab: 0.0,
        }
    }
}

/// Input for [`synth_reach`].
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
#[derive(Debug, Clone, PartialEq)]
pub enum SynthTraceSpec {
    /// Straight minimum-jerk wrist reach with a linear-in-profile change of
    /// the retraction fraction.
    Reach {
        side: Side,
        hmd: Pose,
        start: Vec3,
        end: Vec3,
        wrist_rotation: Rotation,
        duration: f64,
        rate: f64,
        r_start: f64,
        r_end: f64,
        t0: f64,
    },
    /// Minimum-jerk blend between consecutive keyframes.
    Keyframes { keyframes: Vec<HandFrame>, rate: f64 },
}

fn check_rate(rate: f64) -> Result<(), Error> {
    if rate >= 30.0 && rate.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter("sample rate must be at least 30 Hz"))
    }
}

pub fn synth_reach(spec: &SynthTraceSpec, model: &HandModel) -> Result<Vec<HandFrame>, Error> {
    match spec {
        SynthTraceSpec::Reach {
            side,
            hmd,
            start,
            end,
            wrist_rotation,
            duration,
            rate,
            r_start,
            r_end,
            t0,
        } => {
            check_rate(*rate)?;
            if !(*duration > 0.0) {
                return Err(Error::InvalidParameter("duration must be positive"));
            }
            let n = math::round(duration * rate).max(1.0) as usize;
            let forward = wrist_rotation.forward();
            let palm_down = wrist_rotation.rotate(-Vec3::Y);
            let frames = (0..=n)
                .map(|i| {
                    let s = min_jerk(i as f64 / n as f64);
                    let wrist = Pose::new(start.lerp(*end, s), *wrist_rotation);
                    let r = r_start + (r_end - r_start) * s;
                    let shape = HandShape::curled(model, forward, r * model.finger_length(), palm_down);
                    let mut frame = HandFrame {
                        t: t0 + duration * i as f64 / n as f64,
                        hmd: *hmd,
                        ..Default::default()
                    };
                    *frame.hand_mut(*side) = Some(model.build(*side, wrist, &shape));
                    frame
                })
                .collect();
            Ok(frames)
        }
        SynthTraceSpec::Keyframes { keyframes, rate } => {
            check_rate(*rate)?;
            if keyframes.is_empty() {
                return Err(Error::EmptyTrace);
            }
            let mut out = Vec::new();
            for pair in keyframes.windows(2) {
                let (a, b) = (&pair[0], &pair[1]);
                let span = b.t - a.t;
                if !(span > 0.0) {
                    return Err(Error::NonMonotonicTime {
                        previous: a.t,
                        current: b.t,
                    });
                }
                let n = math::round(span * rate).max(1.0) as usize;
                for i in 0..n {
                    let tau = i as f64 / n as f64;
                    out.push(blend_frames(a, b, a.t + span * tau, min_jerk(tau)));
                }
            }
            out.push(*keyframes.last().unwrap());
            Ok(out)
        }
    }
}

fn nlerp(a: Rotation, b: Rotation, s: f64) -> Rotation {
    let dot = a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
    let b = if dot < 0.0 {
        Rotation {
            w: -b.w,
            x: -b.x,
            y: -b.y,
            z: -b.z,
        }
    } else {
        b
    };
    Rotation::new(
        a.w + (b.w - a.w) * s,
        a.x + (b.x - a.x) * s,
        a.y + (b.y - a.y) * s,
        a.z + (b.z - a.z) * s,
    )
}

fn blend_pose(a: &Pose, b: &Pose, s: f64) -> Pose {
    Pose::new(a.position.lerp(b.position, s), nlerp(a.rotation, b.rotation, s))
}

fn blend_frames(a: &HandFrame, b: &HandFrame, t: f64, s: f64) -> HandFrame {
    let hand = |ha: &Option<HandSample>, hb: &Option<HandSample>| match (ha, hb) {
        (Some(x), Some(y)) => Some(HandSample {
            wrist: blend_pose(&x.wrist, &y.wrist, s),
            joints: x.joints.map(|j, p| y.joints.get(j).map_or(p, |q| p.lerp(q, s))),
        }),
        (x, _) => *x,
    };
    HandFrame {
        t,
        hmd: blend_pose(&a.hmd, &b.hmd, s),
        left: hand(&a.left, &b.left),
        right: hand(&a.right, &b.right),
    }
}

/// Timing and posture of the scripted operator used by [`synth_task_suite`].
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteConfig {
    pub rate: f64,
    pub side: Side,
    pub hmd: Pose,
    /// Duration of each pointer movement between targets.
    pub move_duration: f64,
    /// Hold on each target.
    pub dwell: f64,
    pub return_duration: f64,
    /// Hold at rest before the first task and between tasks.
    pub settle: f64,
    /// Fraction of the pointer's vertical travel the physical wrist follows
    /// under the finger mappings.
    pub wrist_follow: f64,
    /// Retraction fraction kept in reserve when choosing the reach.
    pub reach_margin: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            rate: 60.0,
            side: Side::Right,
            hmd: Pose::from_position(Vec3::new(0.0, 1.2, 0.0)),
            move_duration: 1.0,
            dwell: 1.0,
            return_duration: 0.8,
            settle: 0.5,
            wrist_follow: 0.25,
            reach_margin: 0.95,
        }
    }
}

/// Scripted user: for a desired pointer position, produces the physical
/// hand that makes `technique` put its pointer there.
struct Operator<'a> {
    technique: Technique,
    calib: &'a BodyCalibration,
    params: &'a MappingParams,
    cfg: &'a SuiteConfig,
    model: HandModel,
    anchors: BodyAnchors,
    rest_wrist: Vec3,
    rest_pointer: Vec3,
}

impl<'a> Operator<'a> {
    fn new(technique: Technique, calib: &'a BodyCalibration, params: &'a MappingParams, cfg: &'a SuiteConfig) -> Self {
        let anchors = estimate_anchors(&cfg.hmd, calib, cfg.side);
        let out = anchors.outward(cfg.side);
        let forward = anchors.right.cross(anchors.head_up);
        let d = params.dead_zone;
        let lateral = 0.1f64.min(0.5 * d);
        let rest_wrist =
            anchors.chest - anchors.head_up * 0.02 + out * lateral + forward * math::sqrt(d * d - lateral * lateral);
        let rest_pointer = anchors.chest + out * 0.12 + anchors.head_up * 0.12 + forward * 0.40;
        Operator {
            technique,
            calib,
            params,
            cfg,
            model: HandModel::for_finger_length(calib.index_finger_length),
            anchors,
            rest_wrist,
            rest_pointer,
        }
    }

    fn side(&self) -> Side {
        self.cfg.side
    }

    fn wrist_pose(&self, p: Vec3) -> Pose {
        Pose::new(p, self.cfg.hmd.rotation.canonical())
    }

    /// Physical wrist for a virtual reach of `need`, drifting toward the
    /// pointer horizontally only as far as the extension requires.
    fn place_wrist(&self, need: f64, pointer: Vec3) -> Vec3 {
        let a = &self.anchors;
        let up = a.head_up;
        let d = self.params.dead_zone;
        let k = self.params.k;
        let extra = need - self.params.arm_length(self.calib);
        let radius = if extra <= 0.0 {
            d
        } else if k > 0.0 {
            d + (-1.0 + math::sqrt(1.0 + 4.0 * k * extra)) / (2.0 * k)
        } else {
            d + extra
        };
        let rest_h = project_onto_plane(self.rest_wrist - a.chest, up).normalize();
        let aim_h = project_onto_plane(pointer - a.chest, up)
            .try_normalize()
            .unwrap_or(rest_h);
        let dir = rest_h.lerp(aim_h, 0.5).try_normalize().unwrap_or(rest_h);
        let height =
            (self.rest_wrist - a.chest).dot(up) + self.cfg.wrist_follow * (pointer - self.rest_pointer).dot(up);
        a.chest + dir * radius + up * height
    }

    fn reach_at(&self, wrist: Vec3) -> f64 {
        let a = &self.anchors;
        let r = project_onto_plane(wrist - a.chest, a.head_up).norm();
        self.params
            .effective_reach(self.calib, offset_for_distance(r, self.params.dead_zone, self.params.k))
    }

    fn hand_for(&self, pointer: Vec3) -> HandSample {
        let side = self.side();
        let down = -self.anchors.head_up;
        match self.technique {
            Technique::HandPassthrough => {
                let fwd = self.cfg.hmd.rotation.forward();
                let probe = self
                    .model
                    .build(side, self.wrist_pose(Vec3::ZERO), &HandShape::straight(fwd));
                let tip = probe.joints.get(Joint::IndexTip).unwrap();
                self.model
                    .build(side, self.wrist_pose(pointer - tip), &HandShape::straight(fwd))
            }
            Technique::RayCast => {
                let wrist = self.wrist_pose(self.rest_wrist + (pointer - self.rest_pointer) * 0.1);
                let mcp = self.model.mcp_position(side, &wrist);
                let dir = (pointer - mcp).try_normalize().unwrap_or(Vec3::Z);
                self.model.build(side, wrist, &HandShape::straight(dir))
            }
            Technique::Attach | Technique::Direct => {
                let shoulder = self.anchors.shoulder;
                let mut tip_offset = Vec3::ZERO;
                let mut hand = HandSample::default();
                for _ in 0..8 {
                    let target = pointer - tip_offset;
                    let dist = target.distance(shoulder);
                    let u = (target - shoulder).try_normalize().unwrap_or(Vec3::Z);
                    let wrist = self.wrist_pose(self.place_wrist(dist / self.cfg.reach_margin, pointer));
                    let reach = self.reach_at(wrist.position);
                    let shape = if self.technique == Technique::Attach {
                        let r = (dist / reach).clamp(self.params.r_min, 1.0);
                        let cast = shoulder + u * reach;
                        let mcp = self.model.mcp_position(side, &wrist);
                        let proximal = (cast - mcp).try_normalize().unwrap_or(u);
                        HandShape::curled(&self.model, proximal, r * self.calib.index_finger_length, down)
                    } else {
                        self.direct_shape(u, dist, reach)
                    };
                    hand = self.model.build(side, wrist, &shape);
                    tip_offset = hand.joints.get(Joint::IndexTip).unwrap() - wrist.position;
                }
                hand
            }
        }
    }

    /// Finger whose two segments straddle `u` symmetrically so the Direct
    /// wrist lands `dist` from the shoulder.
    fn direct_shape(&self, u: Vec3, dist: f64, length: f64) -> HandShape {
        let (l1, l2) = (self.model.proximal_len, self.model.distal_len);
        let lf = self.calib.index_finger_length;
        let reach_at = |theta: f64| {
            let d = math::sqrt(l1 * l1 + l2 * l2 + 2.0 * l1 * l2 * math::cos(theta));
            (d / lf).clamp(self.params.r_min, 1.0) * length * math::cos(theta / 2.0)
        };
        let (mut lo, mut hi) = (0.0, 0.95 * core::f64::consts::PI);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if reach_at(mid) > dist {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let half = 0.25 * (lo + hi);
        let bend = project_onto_plane(self.anchors.head_up, u)
            .try_normalize()
            .unwrap_or_else(|| u.any_orthogonal());
        let (c, s) = (math::cos(half), math::sin(half));
        HandShape {
            proximal_dir: u * c + bend * s,
            distal_dir: u * c - bend * s,
            thumb_press: 0.0,
            grab: 0.0,
        }
    }
}

#[derive(Clone, Copy)]
struct Segment {
    from: Vec3,
    to: Vec3,
    duration: f64,
}

/// Physical trace of a scripted user performing `tasks` with `technique`:
/// rest, move to the first target, dwell, move to the second, dwell, return.
pub fn synth_task_suite(
    layout: &TargetLayout,
    tasks: &[TaskSpec],
    technique: Technique,
    calib: &BodyCalibration,
    params: &MappingParams,
    cfg: &SuiteConfig,
) -> Result<Vec<HandFrame>, Error> {
    check_rate(cfg.rate)?;
    calib.validate()?;
    params.validate()?;
    let op = Operator::new(technique, calib, params, cfg);
    let rest = op.rest_pointer;
    let mut segments = Vec::new();
    let hold = |p: Vec3, d: f64| Segment {
        from: p,
        to: p,
        duration: d,
    };
    let mv = |a: Vec3, b: Vec3, d: f64| Segment {
        from: a,
        to: b,
        duration: d,
    };
    segments.push(hold(rest, cfg.settle));
    for task in tasks {
        let a = layout
            .target(task.start_id)
            .ok_or(Error::InvalidParameter("task references an unknown target"))?
            .position;
        let b = layout
            .target(task.end_id)
            .ok_or(Error::InvalidParameter("task references an unknown target"))?
            .position;
        segments.push(mv(rest, a, cfg.move_duration));
        segments.push(hold(a, cfg.dwell));
        segments.push(mv(a, b, cfg.move_duration));
        segments.push(hold(b, cfg.dwell));
        segments.push(mv(b, rest, cfg.return_duration));
        segments.push(hold(rest, cfg.settle));
    }

    let mut frames = Vec::new();
    let mut start = 0.0;
    let mut i = 0usize;
    for (k, seg) in segments.iter().enumerate() {
        let end = start + seg.duration;
        let last = k + 1 == segments.len();
        loop {
            let t = i as f64 / cfg.rate;
            if t > end + 1e-9 || (!last && t >= end - 1e-9) {
                break;
            }
            let s = min_jerk((t - start) / seg.duration);
            let mut frame = HandFrame {
                t,
                hmd: cfg.hmd,
                ..Default::default()
            };
            *frame.hand_mut(cfg.side) = Some(op.hand_for(seg.from.lerp(seg.to, s)));
            frames.push(frame);
            i += 1;
        }
        start = end;
    }
    Ok(frames)
}
