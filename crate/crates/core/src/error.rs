use core::fmt;

use crate::hand::{Joint, Side};
use crate::task_lab::DistanceClass;

/// Errors produced by the mapping pipeline and its supporting modules.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// The forward ray does not reach the sphere.
    NoIntersection,
    /// A joint required by the active technique or gesture is absent.
    MissingJoint { side: Side, joint: Joint },
    /// The frame carries no data for the requested hand.
    MissingHand(Side),
    /// A sample timestamp did not advance past the previous one.
    NonMonotonicTime { previous: f64, current: f64 },
    /// IK target coincides with the shoulder.
    DegenerateTarget,
    /// A distance class has no candidate target pairs.
    InfeasibleClass(DistanceClass),
    /// Task count must split evenly over the three distance classes.
    TaskCountNotDivisible(usize),
    /// No samples were provided.
    EmptyTrace,
    /// A parameter violates its documented range.
    InvalidParameter(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NoIntersection => write!(f, "ray does not intersect the reach sphere"),
            Error::MissingJoint { side, joint } => {
                write!(f, "missing joint {} on {} hand", joint.name(), side.name())
            }
            Error::MissingHand(side) => write!(f, "frame has no {} hand", side.name()),
            Error::NonMonotonicTime { previous, current } => {
                write!(f, "timestamp {current} does not advance past previous {previous}")
            }
            Error::DegenerateTarget => write!(f, "IK target coincides with the shoulder"),
            Error::InfeasibleClass(class) => {
                write!(f, "no target pairs in distance class {}", class.name())
            }
            Error::TaskCountNotDivisible(n) => {
                write!(f, "task count must be divisible by 3 (got {n})")
            }
            Error::EmptyTrace => write!(f, "trace contains no samples"),
            Error::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
        }
    }
}

impl core::error::Error for Error {}
