use serde::{Deserialize, Serialize};

use super::collision::{collides, CollisionBox};
use super::setpoints::Setpoint;
use super::trajectory::{plan_joint, plan_linear, Trajectory, TrajectoryKind};
use super::{PlanError, IK_WEIGHTS};
use crate::kinematics::{JointConfig, KinematicChain, KinematicsError, Transform, UrIkSolver};

/// Timing of the planner side of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionParams {
    /// Joint-state publish rate; also the trajectory sample rate.
    pub publish_hz: u32,
    /// Average speed of the fastest joint during a joint move, rad/s.
    pub joint_speed: f64,
    pub min_joint_duration: f64,
    /// Tool speed during linear moves, m/s.
    pub linear_speed: f64,
    /// Setpoints closer than this to their predecessor are reached by a linear move.
    pub max_linear_distance: f64,
    /// Hold time at each setpoint before the capture trigger.
    pub dwell: f64,
    /// A move must end within this distance of its setpoint.
    pub arrival_threshold: f64,
    /// Hold time after the last capture.
    pub tail: f64,
    /// Robot k starts moving after k × this delay.
    pub phase_offset: f64,
}

impl Default for MotionParams {
    fn default() -> Self {
        Self {
            publish_hz: 125,
            joint_speed: 0.8,
            min_joint_duration: 1.0,
            linear_speed: 0.25,
            max_linear_distance: 0.4,
            dwell: 1.5,
            arrival_threshold: 1e-4,
            tail: 1.0,
            phase_offset: 0.75,
        }
    }
}

impl MotionParams {
    pub fn dt(&self) -> f64 {
        1.0 / self.publish_hz as f64
    }

    pub fn ticks(&self, seconds: f64) -> usize {
        (seconds * self.publish_hz as f64 - 1e-9).ceil().max(0.0) as usize
    }
}

/// One arm of the planning twin.
#[derive(Debug, Clone)]
pub struct Robot {
    /// Topic namespace, e.g. `robot1`.
    pub name: String,
    pub solver: UrIkSolver,
    pub home: JointConfig,
}

impl Robot {
    pub fn new(name: impl Into<String>, chain: KinematicChain, home: JointConfig) -> Result<Self, KinematicsError> {
        Ok(Self {
            name: name.into(),
            solver: UrIkSolver::new(&chain)?,
            home,
        })
    }

    pub fn chain(&self) -> &KinematicChain {
        self.solver.chain()
    }

    pub fn topic(&self, leaf: &str) -> String {
        format!("/{}/{}", self.name, leaf)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub setpoint_id: usize,
    pub pose: Transform,
    /// Tick at which the move to the setpoint completes.
    pub arrival_tick: usize,
    /// Tick at which the capture trigger is published.
    pub capture_tick: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoveRecord {
    pub setpoint_id: usize,
    pub kind: TrajectoryKind,
    pub start_tick: usize,
    pub end_tick: usize,
    /// Why a linear move was replaced by a joint move, if it was.
    pub fallback: Option<String>,
}

/// Tick-by-tick commanded configuration of one robot.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotPlan {
    pub name: String,
    pub dt: f64,
    pub q: Vec<JointConfig>,
    pub arrivals: Vec<Arrival>,
    pub moves: Vec<MoveRecord>,
}

impl RobotPlan {
    pub fn duration(&self) -> f64 {
        self.q.len() as f64 * self.dt
    }
}

fn first_collision(chain: &KinematicChain, traj: &Trajectory, boxes: &[CollisionBox]) -> Option<usize> {
    traj.configs().position(|q| collides(chain, q.as_slice(), boxes))
}

/// Nearest collision-free IK solution to `seed`.
fn goal_config(
    robot: &Robot,
    sp: &Setpoint,
    seed: &JointConfig,
    boxes: &[CollisionBox],
) -> Result<JointConfig, PlanError> {
    let sols = robot.solver.solve(&sp.pose);
    if sols.solutions.is_empty() {
        return Err(PlanError::SetpointUnreachable {
            robot: robot.name.clone(),
            setpoint: sp.id,
        });
    }
    sols.solutions
        .into_iter()
        .filter(|q| !collides(robot.chain(), q.as_slice(), boxes))
        .min_by(|a, b| {
            seed.weighted_distance(a, &IK_WEIGHTS)
                .total_cmp(&seed.weighted_distance(b, &IK_WEIGHTS))
        })
        .ok_or(PlanError::NoCollisionFreeSolution {
            robot: robot.name.clone(),
            setpoint: sp.id,
        })
}

fn joint_move(
    robot: &Robot,
    from: &JointConfig,
    sp: &Setpoint,
    params: &MotionParams,
    boxes: &[CollisionBox],
) -> Result<Trajectory, PlanError> {
    let goal = goal_config(robot, sp, from, boxes)?;
    let duration = (from.max_abs_diff(&goal) / params.joint_speed).max(params.min_joint_duration);
    let traj = plan_joint(from, &goal, duration, params.dt());
    if let Some(k) = first_collision(robot.chain(), &traj, boxes) {
        return Err(PlanError::Collision {
            robot: robot.name.clone(),
            setpoint: sp.id,
            sample: k,
        });
    }
    Ok(traj)
}

/// Plans the full visit of `setpoints` in order: a joint move to the first
/// setpoint, linear moves between neighbours (joint move if the linear path
/// fails), a dwell at every setpoint and a capture at the end of each dwell.
pub fn plan_robot(
    robot: &Robot,
    setpoints: &[Setpoint],
    params: &MotionParams,
    boxes: &[CollisionBox],
    start_delay: f64,
) -> Result<RobotPlan, PlanError> {
    let dt = params.dt();
    if collides(robot.chain(), robot.home.as_slice(), boxes) {
        return Err(PlanError::Collision {
            robot: robot.name.clone(),
            setpoint: usize::MAX,
            sample: 0,
        });
    }
    let mut q = vec![robot.home; params.ticks(start_delay) + 1];
    let mut arrivals = Vec::with_capacity(setpoints.len());
    let mut moves = Vec::with_capacity(setpoints.len());
    let mut prev: Option<&Setpoint> = None;
    for sp in setpoints {
        let current = *q.last().expect("timeline starts non-empty");
        let mut fallback = None;
        let traj =
            match prev {
                Some(p) if (p.position() - sp.position()).norm() <= params.max_linear_distance => {
                    let linear = plan_linear(&robot.solver, &p.pose, &sp.pose, params.linear_speed, dt, &current)
                        .and_then(|t| match first_collision(robot.chain(), &t, boxes) {
                            Some(k) => Err(PlanError::Collision {
                                robot: robot.name.clone(),
                                setpoint: sp.id,
                                sample: k,
                            }),
                            None => Ok(t),
                        });
                    match linear {
                        Ok(t) => t,
                        Err(e) => {
                            log::info!(
                                "{}: linear move to setpoint {} failed ({e}); using a joint move",
                                robot.name,
                                sp.id
                            );
                            fallback = Some(e.to_string());
                            joint_move(robot, &current, sp, params, boxes)?
                        }
                    }
                }
                _ => joint_move(robot, &current, sp, params, boxes)?,
            };
        let start_tick = q.len() - 1;
        q.extend(traj.samples.iter().skip(1).map(|s| s.q));
        let arrival_tick = q.len() - 1;
        let reached = robot.chain().forward_kinematics(&q[arrival_tick]).translation;
        let distance = (reached - sp.position()).norm();
        if distance > params.arrival_threshold {
            return Err(PlanError::NotArrived {
                robot: robot.name.clone(),
                setpoint: sp.id,
                distance,
            });
        }
        moves.push(MoveRecord {
            setpoint_id: sp.id,
            kind: if fallback.is_some() {
                TrajectoryKind::Joint
            } else {
                traj.kind
            },
            start_tick,
            end_tick: arrival_tick,
            fallback,
        });
        let hold = q[arrival_tick];
        let capture_tick = arrival_tick + params.ticks(params.dwell);
        q.resize(capture_tick + 1, hold);
        arrivals.push(Arrival {
            setpoint_id: sp.id,
            pose: sp.pose,
            arrival_tick,
            capture_tick,
        });
        prev = Some(sp);
    }
    let last = *q.last().expect("non-empty");
    q.resize(q.len() + params.ticks(params.tail), last);
    Ok(RobotPlan {
        name: robot.name.clone(),
        dt,
        q,
        arrivals,
        moves,
    })
}
