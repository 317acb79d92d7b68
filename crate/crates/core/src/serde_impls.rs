//! Compact encodings: points as `[x, y, z]`, rotations as `[w, x, y, z]`
//! with `w >= 0`, joints as a name-keyed map.

use core::fmt;

use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::geometry::{Rotation, Vec3};
use crate::hand::{Joint, Joints};

impl Serialize for Vec3 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vec3 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let a = <[f64; 3]>::deserialize(d)?;
        let v = Vec3::from_array(a);
        if !v.is_finite() {
            return Err(de::Error::custom("non-finite coordinate"));
        }
        Ok(v)
    }
}

impl Serialize for Rotation {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.canonical().to_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Rotation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [w, x, y, z] = <[f64; 4]>::deserialize(d)?;
        let q = Rotation { w, x, y, z };
        let n = q.norm();
        if !n.is_finite() || n < 1e-6 {
            return Err(de::Error::custom("rotation must be a non-zero quaternion"));
        }
        if (n - 1.0).abs() > 1e-9 {
            Ok(q.normalized().canonical())
        } else {
            Ok(q.canonical())
        }
    }
}

impl Serialize for Joints {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.len()))?;
        for (j, p) in self.iter() {
            m.serialize_entry(j.name(), &p)?;
        }
        m.end()
    }
}

impl<'de> Deserialize<'de> for Joints {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct JointsVisitor;

        impl<'de> Visitor<'de> for JointsVisitor {
            type Value = Joints;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map of joint name to [x, y, z]")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Joints, A::Error> {
                let mut joints = Joints::new();
                while let Some(key) = map.next_key::<&str>()? {
                    let joint = Joint::from_name(key)
                        .ok_or_else(|| de::Error::custom(format_args!("unknown joint `{key}`")))?;
                    joints.set(joint, map.next_value()?);
                }
                Ok(joints)
            }
        }

        d.deserialize_map(JointsVisitor)
    }
}
