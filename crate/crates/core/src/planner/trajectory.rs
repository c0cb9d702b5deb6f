use serde::{Deserialize, Serialize};

use super::{PlanError, IK_WEIGHTS, MAX_BRANCH_JUMP};
use crate::kinematics::{JointConfig, Transform, UrIkSolver};

/// Rotation rate used to pace moves that are mostly reorientation.
pub const LINEAR_ANGULAR_SPEED: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryKind {
    Joint,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    /// Seconds from the start of the trajectory.
    pub t: f64,
    pub q: JointConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub kind: TrajectoryKind,
    pub dt: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first(&self) -> JointConfig {
        self.samples[0].q
    }

    pub fn last(&self) -> JointConfig {
        self.samples[self.samples.len() - 1].q
    }

    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    pub fn configs(&self) -> impl Iterator<Item = &JointConfig> + '_ {
        self.samples.iter().map(|s| &s.q)
    }
}

/// Cubic blend with zero end velocities.
pub fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * (3.0 - 2.0 * s)
}

/// Joint-space move along the shortest arc of every joint, timed by a cubic
/// with zero boundary velocities and sampled every `dt`. When `duration` is
/// not a multiple of `dt` the move is padded to the next whole tick.
pub fn plan_joint(q0: &JointConfig, q1: &JointConfig, duration: f64, dt: f64) -> Trajectory {
    assert!(duration > 0.0 && dt > 0.0 && dt <= duration, "need 0 < dt <= duration");
    let n = ((duration / dt) - 1e-9).ceil().max(1.0) as usize;
    let delta = q0.delta_to(q1);
    let mut samples = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let t = i as f64 * dt;
        let q = if i == 0 {
            *q0
        } else if i == n {
            *q1
        } else {
            let h = smoothstep(t / duration);
            let a: [f64; 6] = std::array::from_fn(|j| q0[j] + delta[j] * h);
            JointConfig::new(a).expect("finite by construction")
        };
        samples.push(TrajectorySample { t, q });
    }
    Trajectory {
        samples,
        kind: TrajectoryKind::Joint,
        dt,
    }
}

/// Cartesian straight-line move: translation interpolated linearly and
/// rotation by slerp, one waypoint per `speed·dt` of travel. Every waypoint
/// is solved by IK, keeping the solution nearest (weighted) to the previous
/// sample.
pub fn plan_linear(
    solver: &UrIkSolver,
    pose0: &Transform,
    pose1: &Transform,
    speed: f64,
    dt: f64,
    q_seed: &JointConfig,
) -> Result<Trajectory, PlanError> {
    assert!(speed > 0.0 && dt > 0.0, "speed and dt must be positive");
    let (dist, angle) = pose0.residual(pose1);
    let steps_t = (dist / (speed * dt) - 1e-9).ceil();
    let steps_r = (angle / (LINEAR_ANGULAR_SPEED * dt) - 1e-9).ceil();
    let n = steps_t.max(steps_r).max(0.0) as usize;
    let mut samples = Vec::with_capacity(n + 1);
    let mut prev = *q_seed;
    for k in 0..=n {
        let pose = match k {
            0 => *pose0,
            k if k == n => *pose1,
            _ => pose0.interpolate(pose1, k as f64 / n as f64),
        };
        let q = solver
            .solve_nearest(&pose, &prev, &IK_WEIGHTS)
            .ok_or(PlanError::Unreachable { waypoint: k })?;
        if k > 0 {
            let jump = prev.max_abs_diff(&q);
            if jump > MAX_BRANCH_JUMP {
                return Err(PlanError::BranchJump { waypoint: k, jump });
            }
        }
        samples.push(TrajectorySample { t: k as f64 * dt, q });
        prev = q;
    }
    Ok(Trajectory {
        samples,
        kind: TrajectoryKind::Linear,
        dt,
    })
}
