//! Robot model: URDF subset parsing, forward kinematics and closed-form
//! inverse kinematics for UR-type arms.

mod chain;
mod ik;
mod transform;
mod urdf;

pub use chain::{ChainLink, JointConfig, KinematicChain};
pub use ik::{inverse_kinematics, IkSolutions, IkStatus, UrIkSolver};
pub use transform::{wrap_angle, PoseSpec, Transform};
pub use urdf::{bundled_ur10_urdf, parse_urdf, parse_urdf_with_tip, DEFAULT_TOOL_LINK};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("URDF parse error at {line}:{column}: {message}")]
    Parse { line: u32, column: u32, message: String },
    #[error("unsupported URDF feature: {0}")]
    Unsupported(String),
    #[error("URDF structure error: {0}")]
    Structure(String),
    #[error("chain geometry not supported by the analytic solver: {0}")]
    UnsupportedGeometry(String),
    #[error("joint angles must be finite")]
    NonFinite,
    #[error("expected {expected} joint values, got {got}")]
    WrongDof { expected: usize, got: usize },
}

/// Parses the bundled UR10 description.
pub fn ur10() -> KinematicChain {
    parse_urdf(bundled_ur10_urdf()).expect("bundled UR10 description is valid")
}
