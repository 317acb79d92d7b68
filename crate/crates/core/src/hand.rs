//! Tracked hand frames, user calibration and the output arm skeleton.

use crate::geometry::{Pose, Rotation, Vec3};
use crate::Error;

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }

    pub fn from_name(s: &str) -> Option<Side> {
        match s {
            "left" => Some(Side::Left),
            "right" => Some(Side::Right),
            _ => None,
        }
    }

    /// +1 for the right hand, -1 for the left.
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Tracked finger joints.
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Joint {
    ThumbTip,
    IndexMcp,
    IndexPip,
    IndexTip,
    MiddlePip,
    MiddleTip,
    RingTip,
    PinkyTip,
}

impl Joint {
    pub const ALL: [Joint; 8] = [
        Joint::ThumbTip,
        Joint::IndexMcp,
        Joint::IndexPip,
        Joint::IndexTip,
        Joint::MiddlePip,
        Joint::MiddleTip,
        Joint::RingTip,
        Joint::PinkyTip,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Joint::ThumbTip => "thumb_tip",
            Joint::IndexMcp => "index_mcp",
            Joint::IndexPip => "index_pip",
            Joint::IndexTip => "index_tip",
            Joint::MiddlePip => "middle_pip",
            Joint::MiddleTip => "middle_tip",
            Joint::RingTip => "ring_tip",
            Joint::PinkyTip => "pinky_tip",
        }
    }

    pub fn from_name(s: &str) -> Option<Joint> {
        Joint::ALL.into_iter().find(|j| j.name() == s)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Sparse set of joint positions keyed by [`Joint`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Joints([Option<Vec3>; 8]);

impl Joints {
    pub fn new() -> Joints {
        Joints::default()
    }

    pub fn get(&self, joint: Joint) -> Option<Vec3> {
        self.0[joint.index()]
    }

    pub fn set(&mut self, joint: Joint, p: Vec3) {
        self.0[joint.index()] = Some(p);
    }

    pub fn remove(&mut self, joint: Joint) -> Option<Vec3> {
        self.0[joint.index()].take()
    }

    pub fn with(mut self, joint: Joint, p: Vec3) -> Joints {
        self.set(joint, p);
        self
    }

    pub fn iter(&self) -> impl Iterator<Item = (Joint, Vec3)> + '_ {
        Joint::ALL.into_iter().filter_map(move |j| self.get(j).map(|p| (j, p)))
    }

    pub fn len(&self) -> usize {
        self.0.iter().filter(|p| p.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Applies `f` to every present joint.
    pub fn map(&self, mut f: impl FnMut(Joint, Vec3) -> Vec3) -> Joints {
        let mut out = Joints::new();
        for (j, p) in self.iter() {
            out.set(j, f(j, p));
        }
        out
    }
}

/// One hand's tracking data within a frame.
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HandSample {
    pub wrist: Pose,
    pub joints: Joints,
}

impl HandSample {
    pub fn require(&self, side: Side, joint: Joint) -> Result<Vec3, Error> {
        self.joints.get(joint).ok_or(Error::MissingJoint { side, joint })
    }
}

/// One timestamped tracking sample.
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HandFrame {
    /// Seconds; strictly increasing within a trace.
    pub t: f64,
    pub hmd: Pose,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub left: Option<HandSample>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub right: Option<HandSample>,
}

impl HandFrame {
    pub fn hand(&self, side: Side) -> Option<&HandSample> {
        match side {
            Side::Left => self.left.as_ref(),
            Side::Right => self.right.as_ref(),
        }
    }

    pub fn hand_mut(&mut self, side: Side) -> &mut Option<HandSample> {
        match side {
            Side::Left => &mut self.left,
            Side::Right => &mut self.right,
        }
    }

    pub fn require_hand(&self, side: Side) -> Result<&HandSample, Error> {
        self.hand(side).ok_or(Error::MissingHand(side))
    }

    pub fn sides(&self) -> impl Iterator<Item = Side> + '_ {
        Side::BOTH.into_iter().filter(|s| self.hand(*s).is_some())
    }

    /// Copy of the frame with every position shifted by `offset`.
    pub fn translated(&self, offset: Vec3) -> HandFrame {
        let shift = |h: &HandSample| HandSample {
            wrist: h.wrist.translated(offset),
            joints: h.joints.map(|_, p| p + offset),
        };
        HandFrame {
            t: self.t,
            hmd: self.hmd.translated(offset),
            left: self.left.as_ref().map(shift),
            right: self.right.as_ref().map(shift),
        }
    }
}

/// User body dimensions and the anthropometric offsets used for anchors.
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyCalibration {
    /// Shoulder-to-wrist length.
    pub arm_length: f64,
    /// MCP-to-fingertip length of the index finger.
    pub index_finger_length: f64,
    pub arm_span: f64,
    /// Seated shoulder height below the eyes.
    pub shoulder_drop: f64,
    /// Chest height below the HMD.
    pub chest_drop: f64,
    /// Seated elbow height below the shoulder.
    pub elbow_drop: f64,
    /// Lateral shoulder offset from the HMD midline.
    pub shoulder_half_width: f64,
}

impl Default for BodyCalibration {
    fn default() -> Self {
        BodyCalibration {
            arm_length: 0.60,
            index_finger_length: 0.085,
            arm_span: 1.70,
            shoulder_drop: 0.20,
            chest_drop: 0.37,
            elbow_drop: 0.335,
            shoulder_half_width: 0.18,
        }
    }
}

impl BodyCalibration {
    pub fn validate(&self) -> Result<(), Error> {
        let lengths = [
            self.arm_length,
            self.index_finger_length,
            self.arm_span,
            self.shoulder_drop,
            self.chest_drop,
            self.elbow_drop,
            self.shoulder_half_width,
        ];
        if lengths.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidParameter("calibration lengths must be positive"));
        }
        if self.index_finger_length >= self.arm_length {
            return Err(Error::InvalidParameter(
                "index finger length must be shorter than the arm",
            ));
        }
        Ok(())
    }
}

/// Virtual arm skeleton for one side.
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmPose {
    pub side: Side,
    pub shoulder: Vec3,
    pub elbow: Vec3,
    pub wrist: Vec3,
    pub hand_rotation: Rotation,
    /// Finger joints carried along with the virtual wrist.
    pub virtual_finger_joints: Joints,
    /// Bone lengths used to build this pose.
    pub upper_len: f64,
    pub lower_len: f64,
    /// Effective reach radius around the shoulder.
    pub reach: f64,
}
