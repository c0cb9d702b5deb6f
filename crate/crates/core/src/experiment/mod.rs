//! Experiment harness: builds robots, plans and the twin from a config,
//! runs them over the loopback or WebSocket bus, and writes every output.

mod config;
mod output;

pub use config::{
    CameraConfig, CylindricalSpec, ExperimentConfig, FastConfig, RobotConfig, RobotSetpoints, SetpointConfig,
    SphericalSpec, Transport, TwinConfig, DEFAULT_CONFIG, SCHEMA_VERSION,
};
pub use output::{
    analyze_and_write, analyze_dir, write_outputs, write_planner_outputs, write_report, write_twin_outputs, OutputFiles,
};

use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::bridge::{self, BridgeError, LoopbackBus, WsClient};
use crate::kinematics::JointConfig;
use crate::metrics::{build_report, ErrorReport, DEFAULT_WINDOW};
use crate::planner::{plan_robot, run_planner_ws, PlanError, PlannerLog, PlannerRunner, Robot, RobotPlan};
use crate::scenecam::{Scene, ScenecamError};
use crate::twin::{run_twin_ws, CaptureSettings, Twin, TwinError, TwinLog, TwinRobot};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error("planning error: {0}")]
    Plan(#[from] PlanError),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl ExperimentError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 2,
            ExperimentError::Plan(_) => 3,
            ExperimentError::Transport(_) => 4,
            ExperimentError::Io(_) => 5,
        }
    }

    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        ExperimentError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<BridgeError> for ExperimentError {
    fn from(e: BridgeError) -> Self {
        ExperimentError::Transport(e.to_string())
    }
}

impl From<ScenecamError> for ExperimentError {
    fn from(e: ScenecamError) -> Self {
        ExperimentError::Io(e.to_string())
    }
}

impl From<TwinError> for ExperimentError {
    fn from(e: TwinError) -> Self {
        match e {
            TwinError::Bridge(b) => b.into(),
            TwinError::Capture(c) => c.into(),
            TwinError::Io { .. } => ExperimentError::Io(e.to_string()),
            TwinError::Protocol(_) => ExperimentError::Transport(e.to_string()),
        }
    }
}

/// Robots, their setpoints and the planned timelines.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub robots: Vec<Robot>,
    pub setpoints: Vec<RobotSetpoints>,
    pub plans: Vec<RobotPlan>,
}

impl ExperimentPlan {
    pub fn setpoint_count(&self) -> usize {
        self.setpoints.iter().map(|r| r.setpoints.len()).sum()
    }
}

pub fn build_robots(cfg: &ExperimentConfig) -> Result<Vec<Robot>, ExperimentError> {
    (0..cfg.robots.len())
        .map(|i| {
            let r = &cfg.robots[i];
            let home = JointConfig::new(r.home).map_err(|e| ExperimentError::Config(e.to_string()))?;
            Robot::new(r.name.clone(), cfg.chain(i)?, home)
                .map_err(|e| ExperimentError::Config(format!("{}: {e}", r.name)))
        })
        .collect()
}

/// Plans every robot; robot k starts after k × phase offset.
pub fn plan(cfg: &ExperimentConfig) -> Result<ExperimentPlan, ExperimentError> {
    let robots = build_robots(cfg)?;
    let setpoints = cfg.setpoints();
    let boxes = cfg.collision_boxes();
    let plans = robots
        .iter()
        .zip(&setpoints)
        .enumerate()
        .map(|(k, (r, sps))| {
            plan_robot(
                r,
                &sps.setpoints,
                &cfg.motion,
                &boxes,
                k as f64 * cfg.motion.phase_offset,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ExperimentPlan {
        robots,
        setpoints,
        plans,
    })
}

/// Builds the rendering twin; `out_dir` of `None` disables image capture.
pub fn build_twin(
    cfg: &ExperimentConfig,
    plan: &ExperimentPlan,
    out_dir: Option<&Path>,
) -> Result<Twin, ExperimentError> {
    let robots = cfg
        .robots
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let spawn =
                JointConfig::new(r.spawn.unwrap_or(r.home)).map_err(|e| ExperimentError::Config(e.to_string()))?;
            Ok(TwinRobot {
                name: r.name.clone(),
                chain: cfg.chain(i)?,
                initial: spawn,
                capture_ids: plan.plans[i].arrivals.iter().map(|a| a.setpoint_id).collect(),
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let scene = Scene::desk(&cfg.scene, cfg.seed);
    scene.validate()?;
    let capture = out_dir.map(|d| CaptureSettings {
        out_dir: d.to_path_buf(),
        intrinsics: cfg.camera.intrinsics,
        depth_mode: cfg.camera.depth_mode,
        camera_offset: cfg.camera_offset(),
        cloud_points: cfg.camera.cloud_points,
    });
    Ok(Twin::new(
        robots,
        cfg.collision_boxes(),
        cfg.twin.lag,
        cfg.twin.tick_hz,
        scene,
        capture,
    )?)
}

/// Lock-step run on the in-process bus. Planner ticks and twin ticks are
/// interleaved in time order (planner first on ties), with a full bus pump
/// after every step, so the result depends on nothing but the inputs.
/// Without a twin only the planner runs.
pub fn simulate_loopback(
    plan: &ExperimentPlan,
    publish_hz: u32,
    mut twin: Option<Twin>,
    twin_hz: u32,
) -> Result<(PlannerLog, Option<TwinLog>), ExperimentError> {
    let bus = LoopbackBus::new();
    let mut pc = bus.client();
    let mut tc = bus.client();
    let mut runner = PlannerRunner::new(&plan.robots, plan.plans.clone(), publish_hz);
    if let Some(t) = &twin {
        t.subscribe(&mut tc)?;
    }
    runner.advertise(&mut pc)?;
    bus.pump();
    let (ph, th) = (publish_hz as u128, twin_hz as u128);
    let last = runner.total_ticks().saturating_sub(1) as u128;
    loop {
        let twin_next = twin.as_ref().map(|t| t.tick() as u128).filter(|k| k * ph <= last * th);
        let planner_due = !runner.is_finished() && twin_next.is_none_or(|k| runner.tick() as u128 * th <= k * ph);
        if planner_due {
            runner.step(&mut pc)?;
            bus.pump();
        } else if let (Some(t), Some(_)) = (twin.as_mut(), twin_next) {
            t.drain(&mut tc)?;
            t.step(&mut tc)?;
            bus.pump();
        } else {
            break;
        }
    }
    let twin_log = match twin {
        Some(mut t) => {
            t.drain(&mut tc)?;
            Some(t.into_log())
        }
        None => None,
    };
    Ok((runner.into_log(), twin_log))
}

/// Planner and twin on separate threads against a live WebSocket bridge.
/// A server is started on `endpoint` unless one is already listening there.
pub fn simulate_ws(
    plan: &ExperimentPlan,
    publish_hz: u32,
    twin: Twin,
    endpoint: &str,
    timeout: Duration,
) -> Result<(PlannerLog, TwinLog), ExperimentError> {
    let server = match bridge::serve(endpoint) {
        Ok(s) => Some(s),
        Err(e) => {
            log::info!("not starting a bridge server ({e}); connecting to an existing one");
            None
        }
    };
    let url = server.as_ref().map_or_else(|| endpoint.to_string(), |s| s.url());
    let mut twin_client = WsClient::connect(&url)?;
    let twin_thread = std::thread::Builder::new()
        .name("twinlink-twin".into())
        .spawn(move || {
            let r = run_twin_ws(&mut twin_client, twin, timeout);
            twin_client.close();
            r
        })
        .map_err(|e| ExperimentError::Transport(e.to_string()))?;
    let mut planner_client = WsClient::connect(&url)?;
    let runner = PlannerRunner::new(&plan.robots, plan.plans.clone(), publish_hz);
    let planner = run_planner_ws(&mut planner_client, runner, 64, timeout);
    planner_client.close();
    let twin = twin_thread
        .join()
        .map_err(|_| ExperimentError::Transport("twin thread panicked".into()))?;
    if let Some(s) = server {
        s.shutdown();
    }
    Ok((planner?, twin?))
}

/// Result of a full run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub setpoints: usize,
    pub captures: usize,
    pub images: usize,
    pub cloud_points: usize,
    pub clamped: Vec<usize>,
    pub report: ErrorReport,
    pub files: OutputFiles,
}

impl RunSummary {
    pub fn table(&self) -> String {
        let mut s = format!(
            "setpoints reached: {}\ncapture triggers:  {}\nimages written:    {}\ncloud points:      {}\n",
            self.setpoints, self.captures, self.images, self.cloud_points
        );
        if self.clamped.iter().any(|&c| c > 0) {
            s.push_str(&format!("collision-clamped twin ticks per robot: {:?}\n", self.clamped));
        }
        s.push('\n');
        s.push_str(&self.report.summary());
        s
    }
}

/// Plans, simulates and writes all outputs under `out_dir`.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunSummary, ExperimentError> {
    std::fs::create_dir_all(out_dir).map_err(|e| ExperimentError::io(out_dir, e))?;
    let plan = plan(cfg)?;
    let twin = build_twin(cfg, &plan, Some(out_dir))?;
    let (planner_log, twin_log) = match &cfg.transport {
        config::Transport::Loopback => {
            let (p, t) = simulate_loopback(&plan, cfg.motion.publish_hz, Some(twin), cfg.twin.tick_hz)?;
            (p, t.expect("twin was supplied"))
        }
        config::Transport::WebSocket(url) => {
            simulate_ws(&plan, cfg.motion.publish_hz, twin, url, Duration::from_secs(30))?
        }
    };
    let report = build_report(
        &planner_log.traces,
        &twin_log.traces,
        &planner_log.arrivals,
        DEFAULT_WINDOW,
    );
    let files = write_outputs(out_dir, cfg, &planner_log, &twin_log, &report)?;
    Ok(RunSummary {
        out_dir: out_dir.to_path_buf(),
        setpoints: planner_log.arrivals.len(),
        captures: twin_log.captures.len(),
        images: twin_log.captures.len() * 3,
        cloud_points: twin_log.cloud.len(),
        clamped: twin_log.clamped.clone(),
        report,
        files,
    })
}

/// Which side of the experiment a process runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Role {
    /// Planner and twin in one process, over the configured transport.
    #[default]
    Both,
    /// Planner only, against a running bridge; writes the planner trace and
    /// arrivals.
    Planner,
    /// Rendering twin only, against a running bridge; writes the twin trace,
    /// images and cloud.
    Twin,
}

impl std::str::FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "both" => Ok(Role::Both),
            "planner" => Ok(Role::Planner),
            "twin" => Ok(Role::Twin),
            _ => Err(format!("unknown role {s:?} (expected both, planner or twin)")),
        }
    }
}

fn ws_url(cfg: &ExperimentConfig) -> Result<String, ExperimentError> {
    match &cfg.transport {
        config::Transport::WebSocket(url) => Ok(url.clone()),
        config::Transport::Loopback => Err(ExperimentError::Config(
            "running the planner or twin alone needs a ws:// transport".into(),
        )),
    }
}

/// Runs only the planner against the bridge named by the config's transport.
pub fn run_planner_process(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    timeout: Duration,
) -> Result<PlannerLog, ExperimentError> {
    let url = ws_url(cfg)?;
    std::fs::create_dir_all(out_dir).map_err(|e| ExperimentError::io(out_dir, e))?;
    let plan = plan(cfg)?;
    let mut client = WsClient::connect(&url)?;
    let runner = PlannerRunner::new(&plan.robots, plan.plans, cfg.motion.publish_hz);
    let log = run_planner_ws(&mut client, runner, 64, timeout);
    client.close();
    let log = log?;
    write_planner_outputs(out_dir, &log)?;
    Ok(log)
}

/// Runs only the rendering twin against the bridge named by the config's
/// transport.
pub fn run_twin_process(cfg: &ExperimentConfig, out_dir: &Path, timeout: Duration) -> Result<TwinLog, ExperimentError> {
    let url = ws_url(cfg)?;
    std::fs::create_dir_all(out_dir).map_err(|e| ExperimentError::io(out_dir, e))?;
    let plan = plan(cfg)?;
    let twin = build_twin(cfg, &plan, Some(out_dir))?;
    let mut client = WsClient::connect(&url)?;
    let log = run_twin_ws(&mut client, twin, timeout);
    client.close();
    let log = log?;
    write_twin_outputs(out_dir, cfg, &log)?;
    Ok(log)
}
