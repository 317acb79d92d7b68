//! Analytic two-bone IK for the virtual arm.
//!
//! The elbow lies in the plane spanned by the shoulder-to-target direction
//! and the pole hint. Targets outside the annulus allowed by the bone
//! lengths and the elbow angle range are pulled onto its boundary along
//! the same direction.

use crate::geometry::Vec3;
use crate::math;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkConfig {
    pub upper_len: f64,
    pub lower_len: f64,
    /// Direction the elbow should bend toward.
    pub pole: Vec3,
    /// Allowed interior elbow angle in degrees, `(min, max)`; 180 is a
    /// straight arm.
    pub elbow_angle_range: (f64, f64),
}

impl IkConfig {
    pub fn new(upper_len: f64, lower_len: f64, pole: Vec3) -> IkConfig {
        IkConfig {
            upper_len,
            lower_len,
            pole,
            elbow_angle_range: (5.0, 180.0),
        }
    }

    /// Equal bones splitting `arm_length`, elbow pointing down and outward.
    pub fn for_arm(arm_length: f64, head_up: Vec3, side_outward: Vec3) -> IkConfig {
        IkConfig::new(arm_length / 2.0, arm_length / 2.0, default_pole(head_up, side_outward))
    }

    pub fn validate(&self) -> Result<(), Error> {
        let (lo, hi) = self.elbow_angle_range;
        if !(self.upper_len > 0.0) || !(self.lower_len > 0.0) {
            return Err(Error::InvalidParameter("bone lengths must be positive"));
        }
        if !(lo > 0.0 && lo < hi && hi <= 180.0) {
            return Err(Error::InvalidParameter("elbow angle range must lie in (0, 180]"));
        }
        if self.pole.try_normalize().is_none() {
            return Err(Error::InvalidParameter("pole direction must be non-zero"));
        }
        Ok(())
    }

    /// Shoulder-to-wrist distance at interior elbow angle `deg`.
    fn span_at(&self, deg: f64) -> f64 {
        let (u, l) = (self.upper_len, self.lower_len);
        let c = math::cos(deg.to_radians());
        math::sqrt((u * u + l * l - 2.0 * u * l * c).max(0.0))
    }

    /// Reachable shoulder-to-wrist distances `[min, max]`.
    pub fn reach_bounds(&self) -> (f64, f64) {
        let (lo, hi) = self.elbow_angle_range;
        let inner = (self.upper_len - self.lower_len).abs() + 1e-9;
        let d_min = self.span_at(lo).max(inner);
        let d_max = if hi >= 180.0 {
            self.upper_len + self.lower_len
        } else {
            self.span_at(hi)
        };
        (d_min, d_max)
    }
}

/// `normalize(-head_up + 0.5 * side_outward)`.
pub fn default_pole(head_up: Vec3, side_outward: Vec3) -> Vec3 {
    (-head_up + side_outward * 0.5).try_normalize().unwrap_or(-Vec3::Y)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkSolution {
    pub elbow: Vec3,
    /// Where the wrist ends up after clamping the target.
    pub wrist: Vec3,
    /// Interior elbow angle in degrees.
    pub elbow_angle: f64,
    /// True if the target had to be moved onto the reachable annulus.
    pub clamped: bool,
}

pub fn solve_two_bone(shoulder: Vec3, target: Vec3, cfg: &IkConfig) -> Result<IkSolution, Error> {
    solve_two_bone_hinted(shoulder, target, cfg, None)
}

/// Like [`solve_two_bone`]; `previous_elbow` keeps the last bend plane when
/// the target direction lines up with the pole.
pub fn solve_two_bone_hinted(
    shoulder: Vec3,
    target: Vec3,
    cfg: &IkConfig,
    previous_elbow: Option<Vec3>,
) -> Result<IkSolution, Error> {
    cfg.validate()?;
    let to_target = target - shoulder;
    let dist = to_target.norm();
    if !(dist >= 1e-9) {
        return Err(Error::DegenerateTarget);
    }
    let dir = to_target / dist;

    let (d_min, d_max) = cfg.reach_bounds();
    let d = dist.clamp(d_min, d_max);
    let clamped = d != dist;

    let bend = bend_direction(dir, cfg.pole, previous_elbow.map(|e| e - shoulder));

    let (u, l) = (cfg.upper_len, cfg.lower_len);
    let cos_a = ((u * u + d * d - l * l) / (2.0 * u * d)).clamp(-1.0, 1.0);
    let sin_a = math::sqrt((1.0 - cos_a * cos_a).max(0.0));
    let elbow = shoulder + (dir * cos_a + bend * sin_a) * u;
    let wrist = shoulder + dir * d;

    let cos_e = ((u * u + l * l - d * d) / (2.0 * u * l)).clamp(-1.0, 1.0);
    Ok(IkSolution {
        elbow,
        wrist,
        elbow_angle: math::acos(cos_e).to_degrees(),
        clamped,
    })
}

/// Unit vector orthogonal to `dir` inside the bend plane.
fn bend_direction(dir: Vec3, pole: Vec3, hint: Option<Vec3>) -> Vec3 {
    const PARALLEL: f64 = 1e-6;
    let perp = |v: Vec3| (v - dir * v.dot(dir)).try_normalize();
    if let Some(p) = pole
        .try_normalize()
        .filter(|p| (*p - dir * p.dot(dir)).norm() > PARALLEL)
    {
        return perp(p).unwrap();
    }
    hint.and_then(|h| {
        let n = h.norm();
        (n > 0.0 && (h - dir * h.dot(dir)).norm() > PARALLEL * n)
            .then(|| perp(h))
            .flatten()
    })
    .unwrap_or_else(|| dir.any_orthogonal())
}
