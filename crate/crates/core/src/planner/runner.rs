use std::time::{Duration, Instant};

use super::schedule::{Robot, RobotPlan};
use super::topics;
use crate::bridge::msgs::{ClockMsg, JointStateMsg, Stamp, TransformStampedMsg};
use crate::bridge::{BoolMsg, BridgeError, BusClient, Payload, WsClient};
use crate::kinematics::KinematicChain;
use crate::metrics::{ArrivalRecord, PoseTrace, TraceSource};

struct Channel {
    robot_id: u32,
    chain: KinematicChain,
    joint_names: Vec<String>,
    plan: RobotPlan,
    joint_topic: String,
    tf_topic: String,
    capture_topic: String,
    next_capture: usize,
    trace: PoseTrace,
    published: usize,
    captures: usize,
}

/// Everything the planner recorded about its own execution.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannerLog {
    /// End-effector trace per robot, one sample per published joint state.
    pub traces: Vec<PoseTrace>,
    pub arrivals: Vec<ArrivalRecord>,
    /// Joint-state messages published per robot.
    pub published: Vec<usize>,
    /// Capture triggers published per robot.
    pub captures: Vec<usize>,
    /// Number of planner ticks executed.
    pub ticks: usize,
}

/// Tick-driven publisher of precomputed robot plans.
///
/// Each [`step`](Self::step) publishes, for every robot whose plan is still
/// running, its joint state and end-effector transform for the current tick
/// and, at the end of a dwell, a capture trigger; then `/clock`. After the
/// last tick a single `/sim/end` is published.
pub struct PlannerRunner {
    channels: Vec<Channel>,
    publish_hz: u32,
    period_ns: i64,
    tick: usize,
    total: usize,
    ended: bool,
}

impl PlannerRunner {
    pub fn new(robots: &[Robot], plans: Vec<RobotPlan>, publish_hz: u32) -> Self {
        assert_eq!(robots.len(), plans.len(), "one plan per robot");
        assert!(
            publish_hz > 0 && 1_000_000_000 % publish_hz == 0,
            "publish period must be a whole number of nanoseconds"
        );
        let total = plans.iter().map(|p| p.q.len()).max().unwrap_or(0);
        let channels = robots
            .iter()
            .zip(plans)
            .enumerate()
            .map(|(i, (r, plan))| Channel {
                robot_id: i as u32 + 1,
                chain: r.chain().clone(),
                joint_names: r.chain().joint_names().iter().map(|s| s.to_string()).collect(),
                joint_topic: r.topic(topics::JOINT_STATES),
                tf_topic: r.topic(topics::TF_EE),
                capture_topic: r.topic(topics::CAPTURE),
                next_capture: 0,
                trace: PoseTrace::new(i as u32 + 1, TraceSource::Planner),
                published: 0,
                captures: 0,
                plan,
            })
            .collect();
        Self {
            channels,
            publish_hz,
            period_ns: 1_000_000_000 / publish_hz as i64,
            tick: 0,
            total,
            ended: false,
        }
    }

    pub fn advertise<B: BusClient>(&self, bus: &mut B) -> Result<(), BridgeError> {
        for c in &self.channels {
            bus.advertise(&c.joint_topic, JointStateMsg::TYPE)?;
            bus.advertise(&c.tf_topic, TransformStampedMsg::TYPE)?;
            bus.advertise(&c.capture_topic, BoolMsg::TYPE)?;
        }
        bus.advertise(topics::CLOCK, ClockMsg::TYPE)?;
        bus.advertise(topics::END, BoolMsg::TYPE)
    }

    pub fn tick(&self) -> usize {
        self.tick
    }

    pub fn total_ticks(&self) -> usize {
        self.total
    }

    pub fn is_finished(&self) -> bool {
        self.ended
    }

    pub fn stamp(&self, tick: usize) -> Stamp {
        let ns = tick as i64 * self.period_ns;
        Stamp {
            secs: ns.div_euclid(1_000_000_000),
            nsecs: ns.rem_euclid(1_000_000_000) as u32,
        }
    }

    pub fn time(&self, tick: usize) -> f64 {
        tick as f64 / self.publish_hz as f64
    }

    /// Publishes one tick. Returns `false` once the end marker has been sent.
    pub fn step<B: BusClient>(&mut self, bus: &mut B) -> Result<bool, BridgeError> {
        if self.ended {
            return Ok(false);
        }
        if self.tick >= self.total {
            bus.publish_payload(topics::END, &BoolMsg { data: true })?;
            self.ended = true;
            return Ok(false);
        }
        let tick = self.tick;
        let stamp = self.stamp(tick);
        let t = self.time(tick);
        for c in &mut self.channels {
            let Some(q) = c.plan.q.get(tick) else { continue };
            let js = JointStateMsg::new(stamp, c.joint_names.clone(), q.as_slice().to_vec())?;
            bus.publish_payload(&c.joint_topic, &js)?;
            let pose = c.chain.forward_kinematics(q);
            let child = format!("{}/tool0", c.plan.name);
            bus.publish_payload(
                &c.tf_topic,
                &TransformStampedMsg::from_pose(stamp, "world", &child, &pose),
            )?;
            c.trace.push(t, pose.translation);
            c.published += 1;
            if c.plan
                .arrivals
                .get(c.next_capture)
                .is_some_and(|a| a.capture_tick == tick)
            {
                bus.publish_payload(&c.capture_topic, &BoolMsg { data: true })?;
                c.next_capture += 1;
                c.captures += 1;
            }
        }
        bus.publish_payload(topics::CLOCK, &ClockMsg { clock: stamp })?;
        self.tick += 1;
        Ok(true)
    }

    pub fn into_log(self) -> PlannerLog {
        let hz = self.publish_hz as f64;
        let mut arrivals = Vec::new();
        let mut traces = Vec::new();
        let mut published = Vec::new();
        let mut captures = Vec::new();
        for c in self.channels {
            for a in &c.plan.arrivals {
                arrivals.push(ArrivalRecord {
                    robot_id: c.robot_id,
                    setpoint_id: a.setpoint_id,
                    arrival_t: a.arrival_tick as f64 / hz,
                    position: a.pose.translation,
                });
            }
            traces.push(c.trace);
            published.push(c.published);
            captures.push(c.captures);
        }
        PlannerLog {
            traces,
            arrivals,
            published,
            captures,
            ticks: self.tick,
        }
    }
}

/// Drives `runner` over a live connection. Waits for the rendering twin to
/// announce itself, then publishes as fast as the twin acknowledges: at most
/// `max_ahead` ticks beyond the last `/twin/clock` it reported, so subscriber
/// queues never overflow.
pub fn run_planner_ws(
    client: &mut WsClient,
    mut runner: PlannerRunner,
    max_ahead: usize,
    timeout: Duration,
) -> Result<PlannerLog, BridgeError> {
    client.subscribe(topics::TWIN_READY, BoolMsg::TYPE)?;
    client.subscribe(topics::TWIN_CLOCK, ClockMsg::TYPE)?;
    runner.advertise(client)?;
    let deadline = Instant::now() + timeout;
    let mut acked: Option<Stamp> = None;
    let mut ready = false;
    while !ready {
        let left = deadline.saturating_duration_since(Instant::now());
        if left.is_zero() {
            return Err(BridgeError::Timeout("no rendering twin announced itself".into()));
        }
        if let Some(m) = client.recv_timeout(left.min(Duration::from_millis(100)))? {
            ready |= m.topic() == topics::TWIN_READY;
        }
    }
    loop {
        let limit = acked.map_or(0, |s| (s.as_nanos() / runner.period_ns as i128) as usize + 1) + max_ahead;
        while runner.tick() < limit && !runner.is_finished() {
            runner.step(client)?;
        }
        if runner.is_finished() {
            break;
        }
        match client.recv_timeout(timeout)? {
            Some(m) if m.topic() == topics::TWIN_CLOCK => {
                let c = ClockMsg::from_value(m.payload().ok_or(BridgeError::MissingField("msg"))?)?;
                acked = Some(acked.map_or(c.clock, |a| a.max(c.clock)));
            }
            Some(_) => {}
            None => return Err(BridgeError::Timeout("rendering twin stopped acknowledging".into())),
        }
    }
    Ok(runner.into_log())
}
