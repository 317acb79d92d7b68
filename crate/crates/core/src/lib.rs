//! Finger-to-arm motion retargeting.
//!
//! Small index-finger motions drive a full virtual arm through two mapping
//! functions (`Attach`, which casts the proximal phalanx onto a reach sphere
//! around the shoulder, and `Direct`, which re-associates the finger segments
//! with the upper and lower arm). Around them sit a Go-Go style spatial
//! extension, a two-bone IK solver, 1€ filtering, gesture triggers, and the
//! target-selection geometry and metrics used to evaluate the techniques.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the CLI and the
//! streaming service live in the `fingermap` crate.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` style checks are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod math;
#[cfg(feature = "serde")]
mod serde_impls;

pub mod arm_ik;
pub mod error;
pub mod euro_filter;
pub mod geometry;
pub mod hand;
pub mod mapping;
pub mod metrics;
pub mod selection;
pub mod task_lab;

pub use error::Error;
pub use geometry::{Pose, Rotation, Vec3};
pub use hand::{ArmPose, BodyCalibration, HandFrame, HandSample, Joint, Joints, Side};
pub use mapping::{MappingParams, MappingSession, Technique};

pub type Result<T, E = Error> = core::result::Result<T, E>;
