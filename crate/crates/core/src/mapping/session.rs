use alloc::vec::Vec;

use super::{
    estimate_anchors, extension_offset, map_attach, map_direct, map_ray, ray_pointer, AttachState, ExtensionState,
    FilterStage, MappingParams, Technique,
};
use crate::arm_ik::{default_pole, solve_two_bone_hinted, IkConfig};
use crate::euro_filter::EuroVec3;
use crate::geometry::Vec3;
use crate::hand::{ArmPose, BodyCalibration, HandFrame, HandSample, Joint, Joints, Side};
use crate::selection::{grab_select, thumb_button, Gesture, TriggerEvent, TriggerState};
use crate::task_lab::Target;
use crate::Error;

/// Per-hand state carried between frames.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SideState {
    wrist_filter: EuroVec3,
    joint_filters: [EuroVec3; 8],
    post_wrist: EuroVec3,
    post_elbow: EuroVec3,
    pub attach: AttachState,
    pub extension: ExtensionState,
    pub previous_elbow: Option<Vec3>,
}

/// Mapping result for one hand.
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideOutput {
    pub side: Side,
    pub pose: ArmPose,
    pub pointer: Vec3,
    /// Target currently under the ray (ray casting only).
    pub pointer_target: Option<usize>,
    pub offset: f64,
    /// Retraction fraction, for the finger mappings.
    pub r: Option<f64>,
}

/// Runs the full pipeline for one hand of one frame.
///
/// Order: smooth raw joints, estimate anchors, reach offset, technique
/// mapping, elbow placement, then carry the hand and fingers over to the
/// virtual wrist. `state` is only replaced on success.
pub fn map_frame(
    frame: &HandFrame,
    side: Side,
    calib: &BodyCalibration,
    params: &MappingParams,
    state: &SideState,
    targets: &[Target],
) -> Result<(SideOutput, SideState), Error> {
    let raw = frame.require_hand(side)?;
    for &joint in params.technique.required_joints() {
        raw.require(side, joint)?;
    }
    let mut next = *state;
    let filtered = params.technique.is_filtered();

    let hand = if filtered && params.filter_stage == FilterStage::PreMap {
        smooth_hand(raw, &mut next, params, frame.t)?
    } else {
        *raw
    };
    let mut work = *frame;
    *work.hand_mut(side) = Some(hand);

    let anchors = estimate_anchors(&frame.hmd, calib, side);
    let (offset, ext) = extension_offset(&work, side, &anchors, params, state.extension)?;
    next.extension = ext;
    let pole = default_pole(anchors.head_up, anchors.outward(side));
    let post = filtered && params.filter_stage == FilterStage::PostMap;

    let mut r = None;
    let mut reach = params.effective_reach(calib, offset);
    let (elbow, wrist, upper_len, lower_len) = match params.technique {
        Technique::Attach => {
            let (res, attach) = map_attach(&work, side, &anchors, calib, params, state.attach, offset)?;
            next.attach = attach;
            r = Some(res.r);
            reach = res.reach;
            let target = if post {
                next.post_wrist.step(&params.euro, res.wrist, frame.t)?
            } else {
                res.wrist
            };
            let cfg = ik_config(params, reach / 2.0, pole);
            let sol = solve_two_bone_hinted(anchors.shoulder, target, &cfg, state.previous_elbow)?;
            (sol.elbow, sol.wrist, cfg.upper_len, cfg.lower_len)
        }
        Technique::Direct => {
            let res = map_direct(&work, side, &anchors, calib, params, offset)?;
            r = Some(res.r);
            reach = res.length;
            if post {
                let e = next.post_elbow.step(&params.euro, res.elbow, frame.t)?;
                let w = next.post_wrist.step(&params.euro, res.wrist, frame.t)?;
                (e, w, e.distance(anchors.shoulder), w.distance(e))
            } else {
                let half = res.r * res.length / 2.0;
                (res.elbow, res.wrist, half, half)
            }
        }
        Technique::HandPassthrough | Technique::RayCast => {
            let target = hand.wrist.position;
            let span = target.distance(anchors.shoulder).max(params.arm_length(calib));
            let cfg = ik_config(params, span / 2.0, pole);
            let sol = solve_two_bone_hinted(anchors.shoulder, target, &cfg, state.previous_elbow)?;
            (sol.elbow, target, cfg.upper_len, cfg.lower_len)
        }
    };
    next.previous_elbow = Some(elbow);

    let virtual_finger_joints = match params.technique {
        Technique::HandPassthrough | Technique::RayCast => hand.joints,
        _ => transport_fingers(&hand, wrist),
    };

    let (pointer, pointer_target) = match params.technique {
        Technique::RayCast => {
            let ray = map_ray(&work, side)?;
            let hit = ray_pointer(&ray, targets, params.ray_max_length);
            (hit.position, hit.target)
        }
        _ => (
            virtual_finger_joints.get(Joint::IndexTip).ok_or(Error::MissingJoint {
                side,
                joint: Joint::IndexTip,
            })?,
            None,
        ),
    };

    let pose = ArmPose {
        side,
        shoulder: anchors.shoulder,
        elbow,
        wrist,
        hand_rotation: hand.wrist.rotation,
        virtual_finger_joints,
        upper_len,
        lower_len,
        reach,
    };
    Ok((
        SideOutput {
            side,
            pose,
            pointer,
            pointer_target,
            offset,
            r,
        },
        next,
    ))
}

fn ik_config(params: &MappingParams, bone: f64, pole: Vec3) -> IkConfig {
    IkConfig {
        elbow_angle_range: params.elbow_angle_range,
        ..IkConfig::new(bone, bone, pole)
    }
}

fn smooth_hand(raw: &HandSample, state: &mut SideState, params: &MappingParams, t: f64) -> Result<HandSample, Error> {
    let mut out = *raw;
    out.wrist.position = state.wrist_filter.step(&params.euro, raw.wrist.position, t)?;
    for (joint, p) in raw.joints.iter() {
        let p = state.joint_filters[joint.index()].step(&params.euro, p, t)?;
        out.joints.set(joint, p);
    }
    Ok(out)
}

/// Physical finger offsets from the wrist, re-attached at `virtual_wrist`.
fn transport_fingers(hand: &HandSample, virtual_wrist: Vec3) -> Joints {
    let w = hand.wrist.position;
    hand.joints.map(|_, p| virtual_wrist + (p - w))
}

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GestureEvent {
    pub side: Side,
    pub gesture: Gesture,
    pub event: TriggerEvent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutput {
    pub t: f64,
    pub sides: Vec<(Side, Result<SideOutput, Error>)>,
    pub events: Vec<GestureEvent>,
}

impl FrameOutput {
    pub fn side(&self, side: Side) -> Option<&Result<SideOutput, Error>> {
        self.sides.iter().find(|(s, _)| *s == side).map(|(_, r)| r)
    }
}

/// Stateful per-user pipeline: filters, sticky casts and trigger latches for
/// both hands. Frames must arrive in timestamp order.
#[derive(Debug, Clone)]
pub struct MappingSession {
    calibration: BodyCalibration,
    params: MappingParams,
    sides: [SideState; 2],
    triggers: TriggerState,
    targets: Vec<Target>,
    last_t: Option<f64>,
}

impl MappingSession {
    pub fn new(calibration: BodyCalibration, params: MappingParams) -> Result<MappingSession, Error> {
        calibration.validate()?;
        params.validate()?;
        Ok(MappingSession {
            calibration,
            params,
            sides: [SideState::default(); 2],
            triggers: TriggerState::default(),
            targets: Vec::new(),
            last_t: None,
        })
    }

    pub fn calibration(&self) -> &BodyCalibration {
        &self.calibration
    }

    pub fn params(&self) -> &MappingParams {
        &self.params
    }

    /// Takes effect from the next frame.
    pub fn set_params(&mut self, params: MappingParams) -> Result<(), Error> {
        params.validate()?;
        self.params = params;
        Ok(())
    }

    /// Spheres the ray-casting pointer can land on.
    pub fn set_targets(&mut self, targets: Vec<Target>) {
        self.targets = targets;
    }

    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    pub fn side_state(&self, side: Side) -> &SideState {
        &self.sides[side.index()]
    }

    pub fn process(&mut self, frame: &HandFrame) -> FrameOutput {
        let mut out = FrameOutput {
            t: frame.t,
            sides: Vec::new(),
            events: Vec::new(),
        };
        if let Some(previous) = self.last_t {
            if !(frame.t > previous) {
                for side in frame.sides() {
                    out.sides.push((
                        side,
                        Err(Error::NonMonotonicTime {
                            previous,
                            current: frame.t,
                        }),
                    ));
                }
                return out;
            }
        }
        self.last_t = Some(frame.t);

        for side in frame.sides() {
            let state = &mut self.sides[side.index()];
            let result =
                map_frame(frame, side, &self.calibration, &self.params, state, &self.targets).map(|(o, next)| {
                    *state = next;
                    o
                });
            out.sides.push((side, result));

            let triggers = &self.params.triggers;
            if let Ok(Some(event)) = thumb_button(frame, side, triggers, &mut self.triggers) {
                out.events.push(GestureEvent {
                    side,
                    gesture: Gesture::ThumbButton,
                    event,
                });
            }
            if let Ok(Some(event)) = grab_select(frame, side, triggers, &mut self.triggers) {
                out.events.push(GestureEvent {
                    side,
                    gesture: Gesture::GrabSelect,
                    event,
                });
            }
        }
        out
    }
}
