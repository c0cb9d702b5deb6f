//! Planning twin: setpoint generation, joint and Cartesian trajectories,
//! stand collision checks, and the tick loop that publishes joint states
//! and capture triggers.

mod collision;
mod runner;
mod schedule;
mod setpoints;
mod trajectory;

pub use collision::{collides, link_segments, CollisionBox, COLLISION_MARGIN};
pub use runner::{run_planner_ws, PlannerLog, PlannerRunner};
pub use schedule::{plan_robot, Arrival, MotionParams, MoveRecord, Robot, RobotPlan};
pub use setpoints::{
    cylindrical_arc, cylindrical_setpoints, look_at, spherical_arc, spherical_setpoints, Pattern, Setpoint,
};
pub use trajectory::{
    plan_joint, plan_linear, smoothstep, Trajectory, TrajectoryKind, TrajectorySample, LINEAR_ANGULAR_SPEED,
};

use thiserror::Error;

/// IK branch-selection weights, base to wrist.
pub const IK_WEIGHTS: [f64; 6] = [3.0, 3.0, 2.0, 1.0, 1.0, 1.0];
/// Largest joint change allowed between consecutive linear-path samples.
pub const MAX_BRANCH_JUMP: f64 = 0.2;

pub mod topics {
    pub const JOINT_STATES: &str = "joint_states";
    pub const TF_EE: &str = "tf_ee";
    pub const CAPTURE: &str = "capture";
    pub const UE_EE: &str = "ue_ee";
    /// Simulated time, published once per planner tick after the robot topics.
    pub const CLOCK: &str = "/clock";
    /// Published once when the planner has finished.
    pub const END: &str = "/sim/end";
    /// Announced by the rendering twin until the first joint state arrives.
    pub const TWIN_READY: &str = "/twin/ready";
    /// Last simulated time the rendering twin has processed.
    pub const TWIN_CLOCK: &str = "/twin/clock";
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("waypoint {waypoint} of the linear path is unreachable")]
    Unreachable { waypoint: usize },
    #[error("IK branch jump of {jump:.3} rad at waypoint {waypoint}")]
    BranchJump { waypoint: usize, jump: f64 },
    #[error("{robot}: setpoint {setpoint} is outside the workspace")]
    SetpointUnreachable { robot: String, setpoint: usize },
    #[error("{robot}: every IK solution for setpoint {setpoint} hits an obstacle")]
    NoCollisionFreeSolution { robot: String, setpoint: usize },
    #[error("{robot}: path to setpoint {setpoint} collides at sample {sample}")]
    Collision {
        robot: String,
        setpoint: usize,
        sample: usize,
    },
    #[error("{robot}: move to setpoint {setpoint} ends {distance:.3e} m away")]
    NotArrived {
        robot: String,
        setpoint: usize,
        distance: f64,
    },
    #[error("{0}")]
    Invalid(String),
}
