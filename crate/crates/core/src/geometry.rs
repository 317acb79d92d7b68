//! Vector, rotation and rigid-pose primitives.
//!
//! World frame: Y up, +Z is the user's initial forward, +X is the user's
//! right, meters, origin on the floor below the starting head position.

use core::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use crate::math;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    #[inline]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        math::sqrt(self.norm_squared())
    }

    #[inline]
    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    /// Unit vector in the same direction, or `None` for a (near) zero vector.
    pub fn try_normalize(self) -> Option<Vec3> {
        let n = self.norm();
        if n > 1e-12 && n.is_finite() {
            Some(self / n)
        } else {
            None
        }
    }

    /// Panics on a zero-length vector; use [`Vec3::try_normalize`] when the
    /// input may degenerate.
    pub fn normalize(self) -> Vec3 {
        self.try_normalize().expect("cannot normalize a zero-length vector")
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn lerp(self, o: Vec3, t: f64) -> Vec3 {
        self + (o - self) * t
    }

    pub fn min(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    /// Some unit vector perpendicular to `self` (which must be non-zero).
    pub fn any_orthogonal(self) -> Vec3 {
        let a = if self.x.abs() < 0.9 { Vec3::X } else { Vec3::Y };
        self.cross(a).normalize()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Vec3 {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    #[inline]
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    #[inline]
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    #[inline]
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Vec3 {
    #[inline]
    fn sub_assign(&mut self, o: Vec3) {
        *self = *self - o;
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    #[inline]
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    #[inline]
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Unit quaternion `(w, x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for Rotation {
    fn default() -> Self {
        Rotation::IDENTITY
    }
}

impl Rotation {
    pub const IDENTITY: Rotation = Rotation {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Builds a rotation from raw components, normalizing them.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Rotation {
        Rotation { w, x, y, z }.normalized()
    }

    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Rotation {
        let a = axis.normalize();
        let (s, c) = (math::sin(angle * 0.5), math::cos(angle * 0.5));
        Rotation::new(c, a.x * s, a.y * s, a.z * s)
    }

    /// Shortest-arc rotation taking unit direction `from` onto `to`.
    pub fn from_to(from: Vec3, to: Vec3) -> Rotation {
        let f = from.normalize();
        let t = to.normalize();
        let d = f.dot(t);
        if d < -1.0 + 1e-12 {
            return Rotation::from_axis_angle(f.any_orthogonal(), core::f64::consts::PI);
        }
        let c = f.cross(t);
        Rotation::new(1.0 + d, c.x, c.y, c.z)
    }

    pub fn norm(&self) -> f64 {
        math::sqrt(self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z)
    }

    pub fn normalized(self) -> Rotation {
        let n = self.norm();
        if !(n > 1e-12) || !n.is_finite() {
            return Rotation::IDENTITY;
        }
        Rotation {
            w: self.w / n,
            x: self.x / n,
            y: self.y / n,
            z: self.z / n,
        }
    }

    /// Same rotation with the double cover resolved to `w >= 0`.
    pub fn canonical(self) -> Rotation {
        if self.w < 0.0 {
            Rotation {
                w: -self.w,
                x: -self.x,
                y: -self.y,
                z: -self.z,
            }
        } else {
            self
        }
    }

    pub fn conjugate(self) -> Rotation {
        Rotation {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    pub fn inverse(self) -> Rotation {
        self.conjugate()
    }

    /// Hamilton product `self * o` (apply `o` first, then `self`).
    pub fn compose(self, o: Rotation) -> Rotation {
        Rotation {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
    }

    pub fn rotate(self, v: Vec3) -> Vec3 {
        let q = Vec3::new(self.x, self.y, self.z);
        let t = 2.0 * q.cross(v);
        v + self.w * t + q.cross(t)
    }

    pub fn right(self) -> Vec3 {
        self.rotate(Vec3::X)
    }

    pub fn up(self) -> Vec3 {
        self.rotate(Vec3::Y)
    }

    pub fn forward(self) -> Vec3 {
        self.rotate(Vec3::Z)
    }

    /// Rotation angle in radians, in `[0, pi]`.
    pub fn angle(self) -> f64 {
        let c = self.canonical();
        2.0 * math::atan2(Vec3::new(c.x, c.y, c.z).norm(), c.w)
    }

    /// Angle of the twist component of this rotation about `axis` (radians,
    /// in `(-pi, pi]`).
    pub fn twist_angle(self, axis: Vec3) -> f64 {
        let a = axis.normalize();
        let p = Vec3::new(self.x, self.y, self.z).dot(a);
        2.0 * math::atan2(p, self.w)
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, o: Rotation) -> Rotation {
        self.compose(o)
    }
}

impl Mul<Vec3> for Rotation {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        self.rotate(v)
    }
}

/// Rigid transform: rotate, then translate.
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub position: Vec3,
    pub rotation: Rotation,
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        position: Vec3::ZERO,
        rotation: Rotation::IDENTITY,
    };

    pub fn new(position: Vec3, rotation: Rotation) -> Pose {
        Pose { position, rotation }
    }

    pub fn from_position(position: Vec3) -> Pose {
        Pose {
            position,
            rotation: Rotation::IDENTITY,
        }
    }

    pub fn transform_point(&self, p: Vec3) -> Vec3 {
        self.rotation.rotate(p) + self.position
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.rotation.inverse();
        Pose {
            position: -inv.rotate(self.position),
            rotation: inv,
        }
    }

    /// `self ∘ o`: applies `o` first.
    pub fn compose(&self, o: &Pose) -> Pose {
        Pose {
            position: self.transform_point(o.position),
            rotation: self.rotation.compose(o.rotation),
        }
    }

    pub fn translated(&self, offset: Vec3) -> Pose {
        Pose {
            position: self.position + offset,
            rotation: self.rotation,
        }
    }
}

/// Nearest forward intersection of a ray with a sphere.
///
/// A ray starting inside the sphere yields its single forward hit. A ray
/// starting on the surface and pointing outward returns the origin (`t = 0`).
pub fn ray_sphere_intersect(origin: Vec3, dir: Vec3, center: Vec3, radius: f64) -> Result<Vec3, Error> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter("sphere radius must be positive"));
    }
    let oc = origin - center;
    let b = oc.dot(dir);
    let c = oc.norm_squared() - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return Err(Error::NoIntersection);
    }
    let s = math::sqrt(disc);
    let t_near = -b - s;
    let t_far = -b + s;
    let t = if t_near >= 0.0 {
        t_near
    } else if t_far >= 0.0 {
        t_far
    } else if c <= 1e-12 * radius * radius {
        // On the surface (to rounding) pointing outward.
        0.0
    } else {
        return Err(Error::NoIntersection);
    };
    let p = origin + dir * t;
    // Pull the point back onto the surface to remove rounding drift.
    match (p - center).try_normalize() {
        Some(u) => Ok(center + u * radius),
        None => Ok(p),
    }
}

/// Component of `v` orthogonal to the unit `normal`.
pub fn project_onto_plane(v: Vec3, normal: Vec3) -> Vec3 {
    v - normal * v.dot(normal)
}
