//! Engine-independent digital-twin simulation of two UR10 arms.
//!
//! A planning twin drives trajectories and publishes joint states over a
//! rosbridge-style bus; a rendering twin follows them open-loop through a
//! lag model, captures RGB/segmentation/depth images on request, and both
//! end-effector traces feed the tracking-error metrics.

// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bridge;
pub mod experiment;
pub mod kinematics;
pub mod metrics;
pub mod planner;
pub mod scenecam;
pub mod twin;

pub use kinematics::{JointConfig, KinematicChain, Transform};
