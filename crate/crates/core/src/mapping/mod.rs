//! Finger-to-arm mappings.
//!
//! Every frame, body anchors are re-estimated from the HMD, the physical
//! wrist's horizontal distance to the chest drives a reach offset, and the
//! selected technique turns the index finger into a virtual wrist target.

mod session;

pub use session::{map_frame, FrameOutput, GestureEvent, MappingSession, SideOutput, SideState};

use crate::euro_filter::EuroParams;
use crate::geometry::{project_onto_plane, ray_sphere_intersect, Pose, Vec3};
use crate::hand::{BodyCalibration, HandFrame, Joint, Side};
use crate::selection::TriggerConfig;
use crate::task_lab::Target;
use crate::Error;

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Technique {
    /// Proximal phalanx cast onto the reach sphere, retracted by finger curl.
    #[default]
    Attach,
    /// Finger segments re-associated with the upper and lower arm.
    Direct,
    /// Physical hand shown as tracked.
    HandPassthrough,
    /// Ray from the index fingertip.
    RayCast,
}

impl Technique {
    pub const ALL: [Technique; 4] = [
        Technique::Attach,
        Technique::Direct,
        Technique::HandPassthrough,
        Technique::RayCast,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Technique::Attach => "attach",
            Technique::Direct => "direct",
            Technique::HandPassthrough => "hand_passthrough",
            Technique::RayCast => "ray_cast",
        }
    }

    pub fn from_name(s: &str) -> Option<Technique> {
        Technique::ALL.into_iter().find(|t| t.name() == s)
    }

    /// Joints the mapping reads.
    pub fn required_joints(self) -> &'static [Joint] {
        match self {
            Technique::Attach | Technique::Direct => &[Joint::IndexMcp, Joint::IndexPip, Joint::IndexTip],
            Technique::HandPassthrough => &[Joint::IndexTip],
            Technique::RayCast => &[Joint::IndexPip, Joint::IndexTip],
        }
    }

    /// Finger mappings are smoothed; the baselines use raw tracking.
    pub fn is_filtered(self) -> bool {
        matches!(self, Technique::Attach | Technique::Direct)
    }
}

/// Where the 1€ filter sits in the pipeline.
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum FilterStage {
    /// Raw wrist and finger joints are smoothed before mapping.
    #[default]
    PreMap,
    /// The mapped virtual wrist (and Direct's elbow) are smoothed.
    PostMap,
    Off,
}

impl FilterStage {
    pub fn name(self) -> &'static str {
        match self {
            FilterStage::PreMap => "pre_map",
            FilterStage::PostMap => "post_map",
            FilterStage::Off => "off",
        }
    }

    pub fn from_name(s: &str) -> Option<FilterStage> {
        [FilterStage::PreMap, FilterStage::PostMap, FilterStage::Off]
            .into_iter()
            .find(|f| f.name() == s)
    }
}

/// Tunables of the mapping pipeline.
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappingParams {
    pub technique: Technique,
    /// Lower clamp of the retraction fraction.
    pub r_min: f64,
    /// Horizontal wrist-to-chest distance of the default posture (D).
    pub dead_zone: f64,
    /// Quadratic gain of the reach extension beyond `dead_zone`.
    pub k: f64,
    /// Overrides the calibrated arm length when set.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub arm_length: Option<f64>,
    /// Smallest allowed effective reach.
    pub min_reach: f64,
    pub euro: EuroParams,
    pub filter_stage: FilterStage,
    pub triggers: TriggerConfig,
    pub ray_max_length: f64,
    /// Interior elbow angle limits in degrees.
    pub elbow_angle_range: (f64, f64),
}

impl Default for MappingParams {
    fn default() -> Self {
        MappingParams {
            technique: Technique::Attach,
            r_min: 0.15,
            dead_zone: 0.18,
            k: 0.6,
            arm_length: None,
            min_reach: 0.05,
            euro: EuroParams::default(),
            filter_stage: FilterStage::PreMap,
            triggers: TriggerConfig::default(),
            ray_max_length: 1.5,
            elbow_angle_range: (5.0, 180.0),
        }
    }
}

impl MappingParams {
    pub fn with_technique(technique: Technique) -> MappingParams {
        MappingParams {
            technique,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.r_min > 0.0 && self.r_min < 1.0) {
            return Err(Error::InvalidParameter("r_min must lie in (0, 1)"));
        }
        if !(self.dead_zone > 0.0) {
            return Err(Error::InvalidParameter("dead_zone must be positive"));
        }
        if !(self.k >= 0.0) {
            return Err(Error::InvalidParameter("k must be non-negative"));
        }
        if let Some(l) = self.arm_length {
            if !(l > 0.0) {
                return Err(Error::InvalidParameter("arm_length must be positive"));
            }
        }
        if !(self.min_reach > 0.0) {
            return Err(Error::InvalidParameter("min_reach must be positive"));
        }
        if !(self.ray_max_length > 0.0) {
            return Err(Error::InvalidParameter("ray_max_length must be positive"));
        }
        let (lo, hi) = self.elbow_angle_range;
        if !(lo > 0.0 && lo < hi && hi <= 180.0) {
            return Err(Error::InvalidParameter("elbow angle range must lie in (0, 180]"));
        }
        self.euro.validate()?;
        self.triggers.validate()
    }

    pub fn arm_length(&self, calib: &BodyCalibration) -> f64 {
        self.arm_length.unwrap_or(calib.arm_length)
    }

    /// Arm length grown or shrunk by the extension offset, floored at
    /// `min_reach`.
    pub fn effective_reach(&self, calib: &BodyCalibration, offset: f64) -> f64 {
        (self.arm_length(calib) + offset).max(self.min_reach)
    }
}

/// Body anchor points derived from the HMD.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyAnchors {
    pub shoulder: Vec3,
    pub chest: Vec3,
    pub head_up: Vec3,
    /// HMD right axis flattened onto the horizontal plane.
    pub right: Vec3,
}

impl BodyAnchors {
    /// Horizontal unit vector pointing away from the body on `side`.
    pub fn outward(&self, side: Side) -> Vec3 {
        self.right * side.sign()
    }
}

pub fn estimate_anchors(hmd: &Pose, calib: &BodyCalibration, side: Side) -> BodyAnchors {
    let rot = hmd.rotation;
    let right = project_onto_plane(rot.right(), Vec3::Y)
        .try_normalize()
        .or_else(|| {
            project_onto_plane(rot.forward(), Vec3::Y)
                .try_normalize()
                .map(|f| Vec3::Y.cross(f))
        })
        .unwrap_or(Vec3::X);
    let shoulder = hmd.position - Vec3::Y * calib.shoulder_drop + right * (side.sign() * calib.shoulder_half_width);
    BodyAnchors {
        shoulder,
        chest: hmd.position - Vec3::Y * calib.chest_drop,
        head_up: rot.up(),
        right,
    }
}

/// Fingertip-to-MCP distance over finger length, clamped to `[r_min, 1]`.
pub fn retraction_fraction(frame: &HandFrame, side: Side, calib: &BodyCalibration, r_min: f64) -> Result<f64, Error> {
    let hand = frame.require_hand(side)?;
    let mcp = hand.require(side, Joint::IndexMcp)?;
    let tip = hand.require(side, Joint::IndexTip)?;
    Ok(clamp_fraction(tip.distance(mcp) / calib.index_finger_length, r_min))
}

#[inline]
pub fn clamp_fraction(r: f64, r_min: f64) -> f64 {
    r.clamp(r_min, 1.0)
}

/// Current reach offset (meters; negative shrinks the arm).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExtensionState {
    pub offset: f64,
    /// Projected wrist-to-chest distance that produced `offset`.
    pub projected_distance: f64,
}

/// Go-Go style growth: identity inside `dead_zone`, quadratic beyond.
pub fn extended_distance(r: f64, dead_zone: f64, k: f64) -> f64 {
    if r < dead_zone {
        r
    } else {
        let e = r - dead_zone;
        r + k * e * e
    }
}

/// Signed reach offset for a projected wrist-to-chest distance.
pub fn offset_for_distance(r: f64, dead_zone: f64, k: f64) -> f64 {
    extended_distance(r, dead_zone, k) - dead_zone
}

/// Horizontal (w.r.t. the head's up axis) distance from chest to wrist.
pub fn projected_wrist_distance(wrist: Vec3, anchors: &BodyAnchors) -> f64 {
    project_onto_plane(wrist - anchors.chest, anchors.head_up).norm()
}

pub fn extension_offset(
    frame: &HandFrame,
    side: Side,
    anchors: &BodyAnchors,
    params: &MappingParams,
    _prev: ExtensionState,
) -> Result<(f64, ExtensionState), Error> {
    let wrist = frame.require_hand(side)?.wrist.position;
    let r = projected_wrist_distance(wrist, anchors);
    let offset = offset_for_distance(r, params.dead_zone, params.k);
    Ok((
        offset,
        ExtensionState {
            offset,
            projected_distance: r,
        },
    ))
}

/// Last valid cast, reused while the finger ray misses the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AttachState {
    pub casting_point: Option<Vec3>,
    /// Unit direction from the shoulder to `casting_point`.
    pub cast_dir: Option<Vec3>,
    pub r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttachResult {
    pub wrist: Vec3,
    pub casting_point: Vec3,
    pub r: f64,
    pub reach: f64,
    /// The ray missed and the previous cast direction was held.
    pub held: bool,
}

pub fn map_attach(
    frame: &HandFrame,
    side: Side,
    anchors: &BodyAnchors,
    calib: &BodyCalibration,
    params: &MappingParams,
    state: AttachState,
    offset: f64,
) -> Result<(AttachResult, AttachState), Error> {
    let hand = frame.require_hand(side)?;
    let mcp = hand.require(side, Joint::IndexMcp)?;
    let pip = hand.require(side, Joint::IndexPip)?;
    let r = retraction_fraction(frame, side, calib, params.r_min)?;
    let reach = params.effective_reach(calib, offset);
    let shoulder = anchors.shoulder;

    let ray_dir = (pip - mcp)
        .try_normalize()
        .ok_or(Error::InvalidParameter("index MCP and PIP coincide"))?;
    let (cast_dir, held) = match ray_sphere_intersect(mcp, ray_dir, shoulder, reach) {
        Ok(p) => match (p - shoulder).try_normalize() {
            Some(d) => (d, false),
            None => (ray_dir, false),
        },
        Err(Error::NoIntersection) => (state.cast_dir.unwrap_or(ray_dir), true),
        Err(e) => return Err(e),
    };
    let casting_point = shoulder + cast_dir * reach;
    let wrist = shoulder + cast_dir * (r * reach);
    Ok((
        AttachResult {
            wrist,
            casting_point,
            r,
            reach,
            held,
        },
        AttachState {
            casting_point: Some(casting_point),
            cast_dir: Some(cast_dir),
            r,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectResult {
    pub wrist: Vec3,
    pub elbow: Vec3,
    pub r: f64,
    /// Effective arm length before retraction.
    pub length: f64,
}

pub fn map_direct(
    frame: &HandFrame,
    side: Side,
    anchors: &BodyAnchors,
    calib: &BodyCalibration,
    params: &MappingParams,
    offset: f64,
) -> Result<DirectResult, Error> {
    let hand = frame.require_hand(side)?;
    let mcp = hand.require(side, Joint::IndexMcp)?;
    let pip = hand.require(side, Joint::IndexPip)?;
    let tip = hand.require(side, Joint::IndexTip)?;
    let v1 = (pip - mcp)
        .try_normalize()
        .ok_or(Error::InvalidParameter("index MCP and PIP coincide"))?;
    let v2 = (tip - pip)
        .try_normalize()
        .ok_or(Error::InvalidParameter("index PIP and tip coincide"))?;
    let r = retraction_fraction(frame, side, calib, params.r_min)?;
    let length = params.effective_reach(calib, offset);
    let half = r * length / 2.0;
    let elbow = anchors.shoulder + v1 * half;
    Ok(DirectResult {
        wrist: elbow + v2 * half,
        elbow,
        r,
        length,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub dir: Vec3,
}

/// Ray from the index fingertip along the distal segment.
pub fn map_ray(frame: &HandFrame, side: Side) -> Result<Ray, Error> {
    let hand = frame.require_hand(side)?;
    let pip = hand.require(side, Joint::IndexPip)?;
    let tip = hand.require(side, Joint::IndexTip)?;
    let dir = (tip - pip)
        .try_normalize()
        .ok_or(Error::InvalidParameter("index PIP and tip coincide"))?;
    Ok(Ray { origin: tip, dir })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayPointer {
    pub position: Vec3,
    /// Index into the target list of the first sphere hit.
    pub target: Option<usize>,
}

/// First target hit by the ray, else the point `max_length` along it.
pub fn ray_pointer(ray: &Ray, targets: &[Target], max_length: f64) -> RayPointer {
    let mut best: Option<(f64, usize, Vec3)> = None;
    for (i, target) in targets.iter().enumerate() {
        let oc = ray.origin - target.position;
        let b = oc.dot(ray.dir);
        let c = oc.norm_squared() - target.radius * target.radius;
        let disc = b * b - c;
        if disc < 0.0 {
            continue;
        }
        let s = crate::math::sqrt(disc);
        let t = if -b - s >= 0.0 {
            -b - s
        } else if -b + s >= 0.0 {
            // Origin inside the target.
            0.0
        } else {
            continue;
        };
        if t <= max_length && best.is_none_or(|(bt, _, _)| t < bt) {
            best = Some((t, i, ray.origin + ray.dir * t));
        }
    }
    match best {
        Some((_, i, p)) => RayPointer {
            position: p,
            target: Some(i),
        },
        None => RayPointer {
            position: ray.origin + ray.dir * max_length,
            target: None,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rotation;
    use crate::hand::{HandSample, Joints};

    fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    fn calib() -> BodyCalibration {
        BodyCalibration {
            index_finger_length: 0.08,
            ..Default::default()
        }
    }

    fn origin_anchors() -> BodyAnchors {
        BodyAnchors {
            shoulder: Vec3::ZERO,
            chest: Vec3::new(0.0, -0.17, 0.0),
            head_up: Vec3::Y,
            right: Vec3::X,
        }
    }

    /// Finger with MCP at `mcp`, proximal segment along `v1`, distal along
    /// `v2`, tip placed so `|tip - mcp| = d`.
    fn finger_frame(mcp: Vec3, v1: Vec3, tip: Vec3) -> HandFrame {
        let joints = Joints::new()
            .with(Joint::IndexMcp, mcp)
            .with(Joint::IndexPip, mcp + v1 * 0.04)
            .with(Joint::IndexTip, tip);
        HandFrame {
            right: Some(HandSample {
                wrist: Pose::from_position(mcp - Vec3::new(0.0, 0.0, 0.09)),
                joints,
            }),
            ..Default::default()
        }
    }

    #[test]
    fn anchors_identity_hmd() {
        let hmd = Pose::from_position(Vec3::new(0.0, 1.2, 0.0));
        let a = estimate_anchors(&hmd, &BodyCalibration::default(), Side::Right);
        assert!(close(a.shoulder, Vec3::new(0.18, 1.0, 0.0), 1e-12));
        assert!(close(a.chest, Vec3::new(0.0, 0.83, 0.0), 1e-12));
        let l = estimate_anchors(&hmd, &BodyCalibration::default(), Side::Left);
        assert!(close(l.shoulder, Vec3::new(-0.18, 1.0, 0.0), 1e-12));
    }

    #[test]
    fn anchors_translate_with_hmd() {
        let c = BodyCalibration::default();
        let rot = Rotation::from_axis_angle(Vec3::Y, 0.4);
        let a = estimate_anchors(&Pose::new(Vec3::new(0.0, 1.2, 0.0), rot), &c, Side::Right);
        let b = estimate_anchors(&Pose::new(Vec3::new(1.0, 1.2, 2.0), rot), &c, Side::Right);
        let off = Vec3::new(1.0, 0.0, 2.0);
        assert!(close(b.shoulder, a.shoulder + off, 1e-12));
        assert!(close(b.chest, a.chest + off, 1e-12));
    }

    #[test]
    fn anchors_follow_head_yaw() {
        let rot = Rotation::from_axis_angle(Vec3::Y, core::f64::consts::FRAC_PI_2);
        let a = estimate_anchors(
            &Pose::new(Vec3::new(0.0, 1.2, 0.0), rot),
            &BodyCalibration::default(),
            Side::Right,
        );
        // Yawing +90 deg about Y turns +X into -Z.
        assert!(close(a.shoulder, Vec3::new(0.0, 1.0, -0.18), 1e-12));
    }

    #[test]
    fn retraction_examples() {
        let c = calib();
        let mcp = Vec3::new(0.0, 0.0, 0.1);
        let r = |d: f64| {
            let f = finger_frame(mcp, Vec3::Z, mcp + Vec3::new(0.0, -d, 0.0));
            retraction_fraction(&f, Side::Right, &c, 0.15).unwrap()
        };
        assert_eq!(r(0.08), 1.0);
        assert_eq!(r(0.05 * 0.08), 0.15);
        assert!((r(0.04) - 0.5).abs() < 1e-15);
        assert_eq!(r(0.2), 1.0);
    }

    #[test]
    fn extension_examples() {
        assert_eq!(offset_for_distance(0.18, 0.18, 0.6), 0.0);
        assert!((offset_for_distance(0.28, 0.18, 0.6) - 0.106).abs() < 1e-12);
        assert!((offset_for_distance(0.08, 0.18, 0.6) + 0.10).abs() < 1e-12);
    }

    #[test]
    fn attach_examples() {
        let c = calib();
        let p = MappingParams::default();
        let mcp = Vec3::new(0.0, 0.0, 0.1);
        for (d, expected) in [(0.08, 0.6), (0.04, 0.3), (0.001, 0.09)] {
            let f = finger_frame(mcp, Vec3::Z, mcp + Vec3::new(0.0, -d, 0.0));
            let (res, st) =
                map_attach(&f, Side::Right, &origin_anchors(), &c, &p, AttachState::default(), 0.0).unwrap();
            assert!(close(res.casting_point, Vec3::new(0.0, 0.0, 0.6), 1e-12));
            assert!(
                close(res.wrist, Vec3::new(0.0, 0.0, expected), 1e-12),
                "{d}: {:?}",
                res.wrist
            );
            assert!(!res.held);
            assert_eq!(st.casting_point, Some(res.casting_point));
        }
    }

    #[test]
    fn attach_holds_direction_on_miss() {
        let c = calib();
        let p = MappingParams::default();
        let f = finger_frame(Vec3::new(0.0, 0.0, 0.1), Vec3::X, Vec3::new(0.08, 0.0, 0.1));
        let (first, st) = map_attach(&f, Side::Right, &origin_anchors(), &c, &p, AttachState::default(), 0.0).unwrap();
        // MCP beyond the sphere, pointing further out.
        let out = finger_frame(Vec3::new(0.0, 0.0, 0.8), Vec3::Z, Vec3::new(0.0, 0.0, 0.88));
        let (held, _) = map_attach(&out, Side::Right, &origin_anchors(), &c, &p, st, 0.0).unwrap();
        assert!(held.held);
        assert!(close(held.casting_point, first.casting_point, 1e-12));
    }

    #[test]
    fn attach_reach_floor() {
        let p = MappingParams::default();
        assert_eq!(p.effective_reach(&calib(), -0.7), 0.05);
    }

    #[test]
    fn direct_examples() {
        let c = calib();
        let p = MappingParams::default();
        let a = origin_anchors();
        let mcp = Vec3::new(0.0, 0.0, 0.1);
        // Straight finger: tip 0.08 from MCP.
        let f = finger_frame(mcp, Vec3::Z, mcp + Vec3::new(0.0, 0.0, 0.08));
        let d = map_direct(&f, Side::Right, &a, &c, &p, 0.0).unwrap();
        assert!(close(d.wrist, Vec3::new(0.0, 0.0, 0.6), 1e-12));
        assert!(close(d.elbow, Vec3::new(0.0, 0.0, 0.3), 1e-12));

        // Right-angle finger with |tip - mcp| = L_f so r = 1.
        let pip = mcp + Vec3::Z * 0.04;
        let tip = pip + Vec3::Y * libm::sqrt(0.08 * 0.08 - 0.04 * 0.04);
        let f = finger_frame(mcp, Vec3::Z, tip);
        let d = map_direct(&f, Side::Right, &a, &c, &p, 0.0).unwrap();
        assert!(close(d.wrist, Vec3::new(0.0, 0.3, 0.3), 1e-12));

        // Straight finger but with the tip pulled toward the MCP (r clamps).
        let joints = Joints::new()
            .with(Joint::IndexMcp, mcp)
            .with(Joint::IndexPip, mcp + Vec3::Z * 0.002)
            .with(Joint::IndexTip, mcp + Vec3::Z * 0.004);
        let mut f = f;
        f.right.as_mut().unwrap().joints = joints;
        let d = map_direct(&f, Side::Right, &a, &c, &p, 0.0).unwrap();
        assert!(close(d.wrist, Vec3::new(0.0, 0.0, 0.09), 1e-12));
    }

    #[test]
    fn ray_examples() {
        let joints = Joints::new()
            .with(Joint::IndexPip, Vec3::new(0.0, 1.0, 0.0))
            .with(Joint::IndexTip, Vec3::new(0.0, 1.0, 0.1));
        let f = HandFrame {
            right: Some(HandSample {
                wrist: Pose::IDENTITY,
                joints,
            }),
            ..Default::default()
        };
        let ray = map_ray(&f, Side::Right).unwrap();
        assert_eq!(ray.origin, Vec3::new(0.0, 1.0, 0.1));
        assert!(close(ray.dir, Vec3::Z, 1e-12));

        let target = Target {
            id: 0,
            position: Vec3::new(0.0, 1.0, 0.5),
            radius: 0.03,
        };
        let hit = ray_pointer(&ray, &[target], 5.0);
        assert!(close(hit.position, Vec3::new(0.0, 1.0, 0.47), 1e-12));
        assert_eq!(hit.target, Some(0));

        let miss = ray_pointer(&ray, &[], 5.0);
        assert!(close(miss.position, Vec3::new(0.0, 1.0, 5.1), 1e-12));
        assert_eq!(miss.target, None);
    }

    #[test]
    fn params_validation() {
        assert!(MappingParams::default().validate().is_ok());
        let bad = MappingParams {
            r_min: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
