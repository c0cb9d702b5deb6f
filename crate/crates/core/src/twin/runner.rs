use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::Vector3;

use super::{lag_step, LagParams, TwinState};
use crate::bridge::msgs::{ClockMsg, JointStateMsg, Stamp, TransformStampedMsg};
use crate::bridge::{BoolMsg, BridgeError, BridgeMessage, BusClient, Payload, WsClient};
use crate::kinematics::{JointConfig, KinematicChain, Transform};
use crate::metrics::{PoseTrace, TraceSource};
use crate::planner::{collides, topics, CollisionBox};
use crate::scenecam::{self, depth_to_pointcloud, render_all, CameraIntrinsics, DepthMode, Scene, ScenecamError};

#[derive(Debug, thiserror::Error)]
pub enum TwinError {
    #[error("bus: {0}")]
    Bridge(#[from] BridgeError),
    #[error("capture: {0}")]
    Capture(#[from] ScenecamError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("protocol: {0}")]
    Protocol(String),
}

/// One arm as the rendering twin sees it.
#[derive(Debug, Clone)]
pub struct TwinRobot {
    /// Topic namespace and output sub-directory, e.g. `robot1`.
    pub name: String,
    pub chain: KinematicChain,
    /// Configuration the arm holds until its first target takes effect.
    pub initial: JointConfig,
    /// Setpoint id of each expected capture, in order; names the image files.
    /// When empty, files are named by capture sequence number.
    pub capture_ids: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaptureSettings {
    pub out_dir: PathBuf,
    pub intrinsics: CameraIntrinsics,
    pub depth_mode: DepthMode,
    /// Tool-to-camera transform.
    pub camera_offset: Transform,
    /// Most points one capture contributes to the fused cloud; 0 disables it.
    pub cloud_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaptureRecord {
    pub robot_id: u32,
    /// Per-robot capture sequence number.
    pub seq: usize,
    pub setpoint_id: usize,
    /// Stamp of the joint state the trigger accompanied.
    pub trigger_t: f64,
    /// Twin time at which the images were taken.
    pub t: f64,
    pub camera_pose: Transform,
    /// Image paths relative to the output directory: rgb, seg, depth.
    pub files: [String; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwinLog {
    pub traces: Vec<PoseTrace>,
    pub captures: Vec<CaptureRecord>,
    /// Ticks per robot on which the collision clamp held the arm.
    pub clamped: Vec<usize>,
    /// Fused world-frame points from all captures.
    pub cloud: Vec<Vector3<f64>>,
    pub ticks: u64,
}

struct ArmState {
    id: u32,
    robot: TwinRobot,
    joint_topic: String,
    capture_topic: String,
    ue_topic: String,
    /// Received targets with their stamps, oldest first.
    pending: VecDeque<(i128, JointConfig)>,
    last_stamp: Option<i128>,
    triggers: VecDeque<i128>,
    state: TwinState,
    trace: PoseTrace,
    clamped: usize,
    seq: usize,
}

/// What a message meant to the twin loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    None,
    Clock(Stamp),
    End,
}

/// Tick-driven rendering twin. Open loop: it only ever reads the planner's
/// topics and never publishes anything the planner consumes as state.
pub struct Twin {
    arms: Vec<ArmState>,
    boxes: Vec<CollisionBox>,
    params: LagParams,
    scene: Scene,
    capture: Option<CaptureSettings>,
    tick_hz: u32,
    tick: u64,
    started: bool,
    ended: bool,
    captures: Vec<CaptureRecord>,
    cloud: Vec<Vector3<f64>>,
}

impl Twin {
    pub fn new(
        robots: Vec<TwinRobot>,
        boxes: Vec<CollisionBox>,
        params: LagParams,
        tick_hz: u32,
        scene: Scene,
        capture: Option<CaptureSettings>,
    ) -> Result<Self, TwinError> {
        params.validate().map_err(TwinError::Protocol)?;
        if tick_hz == 0 {
            return Err(TwinError::Protocol("tick rate must be positive".into()));
        }
        if let Some(c) = &capture {
            c.intrinsics.validate()?;
        }
        let arms = robots
            .into_iter()
            .enumerate()
            .map(|(i, robot)| ArmState {
                id: i as u32 + 1,
                joint_topic: format!("/{}/{}", robot.name, topics::JOINT_STATES),
                capture_topic: format!("/{}/{}", robot.name, topics::CAPTURE),
                ue_topic: format!("/{}/{}", robot.name, topics::UE_EE),
                pending: VecDeque::new(),
                last_stamp: None,
                triggers: VecDeque::new(),
                state: TwinState {
                    q: robot.initial,
                    q_target: robot.initial,
                    t: 0.0,
                },
                trace: PoseTrace::new(i as u32 + 1, TraceSource::Twin),
                clamped: 0,
                seq: 0,
                robot,
            })
            .collect();
        Ok(Self {
            arms,
            boxes,
            params,
            scene,
            capture,
            tick_hz,
            tick: 0,
            started: false,
            ended: false,
            captures: Vec::new(),
            cloud: Vec::new(),
        })
    }

    pub fn subscribe<B: BusClient>(&self, bus: &mut B) -> Result<(), BridgeError> {
        for a in &self.arms {
            bus.subscribe(&a.joint_topic, JointStateMsg::TYPE)?;
            bus.subscribe(&a.capture_topic, BoolMsg::TYPE)?;
            bus.advertise(&a.ue_topic, TransformStampedMsg::TYPE)?;
        }
        bus.subscribe(topics::CLOCK, ClockMsg::TYPE)?;
        bus.subscribe(topics::END, BoolMsg::TYPE)?;
        bus.advertise(topics::TWIN_READY, BoolMsg::TYPE)?;
        bus.advertise(topics::TWIN_CLOCK, ClockMsg::TYPE)
    }

    /// True once any planner message has arrived.
    pub fn started(&self) -> bool {
        self.started
    }

    pub fn ended(&self) -> bool {
        self.ended
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    /// Time of the next tick, seconds.
    pub fn next_time(&self) -> f64 {
        self.tick as f64 / self.tick_hz as f64
    }

    /// Whether the next tick is at or before `stamp`.
    pub fn next_tick_due(&self, stamp: Stamp) -> bool {
        self.tick as i128 * 1_000_000_000 <= stamp.as_nanos() * self.tick_hz as i128
    }

    pub fn handle(&mut self, msg: &BridgeMessage) -> Result<Event, TwinError> {
        let topic = msg.topic();
        let payload = || msg.payload().ok_or(BridgeError::MissingField("msg"));
        if topic == topics::CLOCK {
            self.started = true;
            return Ok(Event::Clock(ClockMsg::from_value(payload()?)?.clock));
        }
        if topic == topics::END {
            self.ended = true;
            return Ok(Event::End);
        }
        for a in &mut self.arms {
            if topic == a.joint_topic {
                self.started = true;
                let js = JointStateMsg::from_value(payload()?)?;
                let names = a.robot.chain.joint_names();
                let mut q = [0.0; 6];
                for (j, name) in names.iter().enumerate() {
                    let k = js.name.iter().position(|n| n == name).ok_or_else(|| {
                        TwinError::Protocol(format!("{}: joint state lacks joint {name:?}", a.joint_topic))
                    })?;
                    q[j] = js.position[k];
                }
                let stamp = js.stamp().as_nanos();
                if a.last_stamp.is_some_and(|s| s >= stamp) {
                    return Err(TwinError::Protocol(format!("{}: stamps must increase", a.joint_topic)));
                }
                a.last_stamp = Some(stamp);
                let q = JointConfig::new(q).map_err(|e| TwinError::Protocol(e.to_string()))?;
                a.pending.push_back((stamp, q));
                return Ok(Event::None);
            }
            if topic == a.capture_topic {
                let m = BoolMsg::from_value(payload()?)?;
                if m.data {
                    let stamp = a.last_stamp.ok_or_else(|| {
                        TwinError::Protocol(format!("{}: capture before any joint state", a.capture_topic))
                    })?;
                    a.triggers.push_back(stamp);
                }
                return Ok(Event::None);
            }
        }
        Ok(Event::None)
    }

    /// Handles every message currently queued on `bus`.
    pub fn drain<B: BusClient>(&mut self, bus: &mut B) -> Result<(), TwinError> {
        while let Some(m) = bus.try_recv()? {
            self.handle(&m)?;
        }
        Ok(())
    }

    /// Advances one tick for every arm, publishing `/robotN/ue_ee`.
    pub fn step<B: BusClient>(&mut self, bus: &mut B) -> Result<(), TwinError> {
        let hz = self.tick_hz as i128;
        let now_scaled = self.tick as i128 * 1_000_000_000;
        let delay = self.params.delay_ns() as i128;
        let t = self.next_time();
        let dt = 1.0 / self.tick_hz as f64;
        let stamp = Stamp::from_secs_f64(t);
        let mut due = Vec::new();
        for a in &mut self.arms {
            while a.pending.front().is_some_and(|(s, _)| (s + delay) * hz <= now_scaled) {
                a.state.q_target = a.pending.pop_front().expect("front exists").1;
            }
            let prev = a.state.q;
            let mut next = lag_step(&a.state, dt, &self.params);
            next.t = t;
            if next.q != prev && collides(&a.robot.chain, next.q.as_slice(), &self.boxes) {
                if a.clamped == 0 {
                    log::warn!("{}: environment collision at t={t:.3}s, holding the arm", a.robot.name);
                }
                a.clamped += 1;
                next.q = prev;
            }
            a.state = next;
            let pose = a.robot.chain.forward_kinematics(&a.state.q);
            a.trace.push(t, pose.translation);
            let child = format!("{}/ue_tool0", a.robot.name);
            bus.publish_payload(
                &a.ue_topic,
                &TransformStampedMsg::from_pose(stamp, "world", &child, &pose),
            )?;
            while a.triggers.front().is_some_and(|s| (s + delay) * hz <= now_scaled) {
                let s = a.triggers.pop_front().expect("front exists");
                due.push((a.id, s, pose));
            }
        }
        for (robot_id, trigger, pose) in due {
            self.take_capture(robot_id, trigger, &pose, t)?;
        }
        self.tick += 1;
        Ok(())
    }

    fn take_capture(&mut self, robot_id: u32, trigger_ns: i128, ee_pose: &Transform, t: f64) -> Result<(), TwinError> {
        let arm = &mut self.arms[robot_id as usize - 1];
        let seq = arm.seq;
        arm.seq += 1;
        let setpoint_id = if arm.robot.capture_ids.is_empty() {
            seq
        } else {
            *arm.robot.capture_ids.get(seq).ok_or_else(|| {
                TwinError::Protocol(format!("{}: unexpected capture trigger #{}", arm.robot.name, seq + 1))
            })?
        };
        let name = arm.robot.name.clone();
        let Some(cap) = &self.capture else {
            return Ok(());
        };
        let camera_pose = ee_pose * &cap.camera_offset;
        let frame = render_all(&self.scene, &camera_pose, &cap.intrinsics, cap.depth_mode);
        let dir = cap.out_dir.join(&name);
        std::fs::create_dir_all(&dir).map_err(|source| TwinError::Io {
            path: dir.clone(),
            source,
        })?;
        let files = [
            format!("{name}/{setpoint_id:04}_rgb.ppm"),
            format!("{name}/{setpoint_id:04}_seg.ppm"),
            format!("{name}/{setpoint_id:04}_depth.pfm"),
        ];
        let out = |f: &str| -> PathBuf { cap.out_dir.join(Path::new(f)) };
        scenecam::write_ppm(&frame.rgb, &out(&files[0]))?;
        scenecam::write_ppm(&frame.seg, &out(&files[1]))?;
        scenecam::write_pfm(&frame.depth, &out(&files[2]))?;
        if cap.cloud_points > 0 {
            let pts = depth_to_pointcloud(&frame.depth, &cap.intrinsics, &camera_pose);
            let stride = pts.len().div_ceil(cap.cloud_points).max(1);
            self.cloud.extend(pts.into_iter().step_by(stride));
        }
        self.captures.push(CaptureRecord {
            robot_id,
            seq,
            setpoint_id,
            trigger_t: trigger_ns as f64 * 1e-9,
            t,
            camera_pose,
            files,
        });
        Ok(())
    }

    pub fn into_log(self) -> TwinLog {
        let mut traces = Vec::new();
        let mut clamped = Vec::new();
        for a in self.arms {
            traces.push(a.trace);
            clamped.push(a.clamped);
        }
        TwinLog {
            traces,
            captures: self.captures,
            clamped,
            cloud: self.cloud,
            ticks: self.tick,
        }
    }
}

/// Runs the twin against a live bus until the planner's end marker. Ticks
/// advance only as `/clock` stamps arrive, and each processed stamp is
/// acknowledged on `/twin/clock`.
pub fn run_twin_ws(client: &mut WsClient, mut twin: Twin, timeout: Duration) -> Result<TwinLog, TwinError> {
    twin.subscribe(client)?;
    let started_at = Instant::now();
    while !twin.started() {
        client.publish_payload(topics::TWIN_READY, &BoolMsg { data: true })?;
        let poll_until = Instant::now() + Duration::from_millis(100);
        while let Some(m) = client.recv_timeout(poll_until.saturating_duration_since(Instant::now()))? {
            on_message(client, &mut twin, &m)?;
            if twin.started() {
                break;
            }
        }
        if !twin.started() && started_at.elapsed() > timeout {
            return Err(BridgeError::Timeout("no planner traffic".into()).into());
        }
    }
    while !twin.ended() {
        match client.recv_timeout(timeout)? {
            Some(m) => on_message(client, &mut twin, &m)?,
            None => return Err(BridgeError::Timeout("planner went silent".into()).into()),
        }
    }
    Ok(twin.into_log())
}

fn on_message(client: &mut WsClient, twin: &mut Twin, m: &BridgeMessage) -> Result<(), TwinError> {
    if let Event::Clock(stamp) = twin.handle(m)? {
        while twin.next_tick_due(stamp) {
            twin.step(client)?;
        }
        client.publish_payload(topics::TWIN_CLOCK, &ClockMsg { clock: stamp })?;
    }
    Ok(())
}
