use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::kinematics::{bundled_ur10_urdf, parse_urdf, JointConfig, KinematicChain, PoseSpec, Transform};
use crate::planner::{cylindrical_arc, spherical_arc, CollisionBox, MotionParams, Setpoint};
use crate::scenecam::{CameraIntrinsics, DepthMode, SceneParams};
use crate::twin::{LagParams, DEFAULT_TICK_HZ};

pub const SCHEMA_VERSION: u32 = 1;

/// The bundled desk experiment: two UR10s, 120 setpoints, 1080p captures.
pub const DEFAULT_CONFIG: &str = include_str!("default_config.json");

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Transport {
    #[default]
    Loopback,
    /// `ws://host:port`
    WebSocket(String),
}

impl FromStr for Transport {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "loopback" {
            Ok(Transport::Loopback)
        } else if let Some(rest) = s.strip_prefix("ws://") {
            if rest.is_empty() {
                return Err("websocket transport needs host:port".into());
            }
            Ok(Transport::WebSocket(s.to_string()))
        } else {
            Err(format!(
                "transport must be \"loopback\" or \"ws://host:port\", got {s:?}"
            ))
        }
    }
}

impl TryFrom<String> for Transport {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Transport> for String {
    fn from(t: Transport) -> Self {
        t.to_string()
    }
}

impl fmt::Display for Transport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transport::Loopback => f.write_str("loopback"),
            Transport::WebSocket(url) => f.write_str(url),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotConfig {
    /// Topic namespace and output sub-directory.
    pub name: String,
    /// URDF file; the bundled UR10 when absent. Relative paths resolve
    /// against the config file's directory.
    #[serde(default)]
    pub urdf: Option<PathBuf>,
    pub base: PoseSpec,
    /// Planner start configuration, rad.
    pub home: [f64; 6],
    /// Rendering-twin spawn configuration; `home` when absent.
    #[serde(default)]
    pub spawn: Option<[f64; 6]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphericalSpec {
    pub radius: f64,
    pub rings: usize,
    pub per_ring: usize,
    pub lat_range_deg: [f64; 2],
    /// Each robot covers ± this longitude around the direction to its base.
    pub lon_half_width_deg: f64,
    /// Sphere centre; the plant centre when absent.
    #[serde(default)]
    pub center: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CylindricalSpec {
    pub radius: f64,
    /// Ring heights above `axis_point`.
    pub heights: Vec<f64>,
    pub per_ring: usize,
    pub lon_half_width_deg: f64,
    /// A point on the vertical axis; the pot base when absent.
    #[serde(default)]
    pub axis_point: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetpointConfig {
    #[serde(default)]
    pub spherical: Option<SphericalSpec>,
    #[serde(default)]
    pub cylindrical: Option<CylindricalSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwinConfig {
    pub tick_hz: u32,
    pub lag: LagParams,
}

impl Default for TwinConfig {
    fn default() -> Self {
        Self {
            tick_hz: DEFAULT_TICK_HZ,
            lag: LagParams::ideal(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    pub intrinsics: CameraIntrinsics,
    pub depth_mode: DepthMode,
    /// Tool-to-camera offset.
    pub offset: PoseSpec,
    /// Points each capture adds to `cloud.ply`; 0 disables the cloud.
    pub cloud_points: usize,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            intrinsics: CameraIntrinsics::hd1080(),
            depth_mode: DepthMode::Planar,
            offset: PoseSpec {
                xyz: [0.0; 3],
                rpy: [0.0; 3],
            },
            cloud_points: 5000,
        }
    }
}

/// Reductions applied by `--fast`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FastConfig {
    /// Spherical rings / cylinder heights kept per robot.
    pub rings: usize,
    pub per_ring: usize,
    pub width: u32,
    pub height: u32,
}

impl Default for FastConfig {
    fn default() -> Self {
        Self {
            rings: 2,
            per_ring: 3,
            width: 160,
            height: 90,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    #[serde(default)]
    pub seed: u64,
    pub robots: Vec<RobotConfig>,
    pub setpoints: SetpointConfig,
    #[serde(default)]
    pub motion: MotionParams,
    #[serde(default)]
    pub twin: TwinConfig,
    #[serde(default)]
    pub scene: SceneParams,
    #[serde(default)]
    pub camera: CameraConfig,
    #[serde(default)]
    pub transport: Transport,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub fast: FastConfig,
    /// Directory relative URDF paths resolve against; set by [`Self::load`].
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

/// Setpoints of one robot, in visiting order.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotSetpoints {
    pub robot: String,
    pub setpoints: Vec<Setpoint>,
}

fn cfg_err(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn bundled() -> Self {
        Self::from_json(DEFAULT_CONFIG).expect("bundled config is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| cfg_err(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.schema != SCHEMA_VERSION {
            return Err(cfg_err(format!(
                "unsupported schema {} (expected {SCHEMA_VERSION})",
                self.schema
            )));
        }
        if self.robots.is_empty() {
            return Err(cfg_err("at least one robot is required"));
        }
        let mut names = std::collections::BTreeSet::new();
        for r in &self.robots {
            if r.name.is_empty() || r.name.contains('/') || !names.insert(&r.name) {
                return Err(cfg_err(format!(
                    "robot name {:?} is empty, contains '/', or repeats",
                    r.name
                )));
            }
            if let Some(p) = &r.urdf {
                let p = self.resolve(p);
                if !p.is_file() {
                    return Err(cfg_err(format!("{}: URDF file not found", p.display())));
                }
            }
            JointConfig::new(r.home).map_err(|e| cfg_err(format!("{}: home: {e}", r.name)))?;
        }
        let m = &self.motion;
        if m.publish_hz == 0 || 1_000_000_000 % m.publish_hz != 0 {
            return Err(cfg_err("motion.publish_hz must divide 1e9"));
        }
        for (v, what) in [
            (m.joint_speed, "joint_speed"),
            (m.linear_speed, "linear_speed"),
            (m.min_joint_duration, "min_joint_duration"),
            (m.arrival_threshold, "arrival_threshold"),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(cfg_err(format!("motion.{what} must be positive")));
            }
        }
        for (v, what) in [(m.dwell, "dwell"), (m.tail, "tail"), (m.phase_offset, "phase_offset")] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(cfg_err(format!("motion.{what} must be >= 0")));
            }
        }
        self.twin
            .lag
            .validate()
            .map_err(|e| cfg_err(format!("twin.lag: {e}")))?;
        if self.twin.tick_hz == 0 {
            return Err(cfg_err("twin.tick_hz must be positive"));
        }
        self.camera.intrinsics.validate().map_err(|e| cfg_err(e.to_string()))?;
        if let Some(s) = &self.setpoints.spherical {
            if !(s.radius > 0.0) || s.rings == 0 || s.per_ring == 0 {
                return Err(cfg_err("setpoints.spherical: radius and counts must be positive"));
            }
            if s.lat_range_deg.iter().any(|l| l.abs() >= 90.0) {
                return Err(cfg_err("setpoints.spherical: latitudes must lie in (-90, 90)"));
            }
        }
        if let Some(c) = &self.setpoints.cylindrical {
            if !(c.radius > 0.0) || c.per_ring == 0 || c.heights.is_empty() {
                return Err(cfg_err(
                    "setpoints.cylindrical: radius, heights and counts must be positive",
                ));
            }
        }
        if self.setpoints.spherical.is_none() && self.setpoints.cylindrical.is_none() {
            return Err(cfg_err("no setpoint pattern configured"));
        }
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(d) if p.is_relative() => d.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// Applies the `--fast` reductions.
    pub fn fast_mode(&mut self) {
        let f = self.fast.clone();
        if let Some(s) = &mut self.setpoints.spherical {
            s.rings = s.rings.min(f.rings);
            s.per_ring = s.per_ring.min(f.per_ring);
        }
        if let Some(c) = &mut self.setpoints.cylindrical {
            c.heights.truncate(f.rings.max(1));
            c.per_ring = c.per_ring.min(f.per_ring);
        }
        self.set_resolution(f.width, f.height);
    }

    /// Scales the capture intrinsics to a new resolution, same field of view.
    pub fn set_resolution(&mut self, width: u32, height: u32) {
        self.camera.intrinsics = self.camera.intrinsics.scaled(width, height);
    }

    /// Kinematic chain of robot `i`, placed at its base.
    pub fn chain(&self, i: usize) -> Result<KinematicChain, ExperimentError> {
        let r = &self.robots[i];
        let chain = match &r.urdf {
            None => parse_urdf(bundled_ur10_urdf()),
            Some(p) => {
                let p = self.resolve(p);
                let text = std::fs::read_to_string(&p).map_err(|e| cfg_err(format!("{}: {e}", p.display())))?;
                parse_urdf(&text)
            }
        }
        .map_err(|e| cfg_err(format!("{}: {e}", r.name)))?;
        Ok(chain.with_base(r.base.into()))
    }

    /// Stand and table boxes the arms must avoid.
    pub fn collision_boxes(&self) -> Vec<CollisionBox> {
        let mut out: Vec<CollisionBox> = self
            .scene
            .stand_boxes()
            .iter()
            .map(|(c, h)| CollisionBox::new(c.coords, *h))
            .collect();
        let (c, h) = self.scene.table_box();
        out.push(CollisionBox::new(c.coords, h));
        out
    }

    /// Setpoints per robot. Each robot covers the arc of longitudes facing
    /// its base; ids run consecutively across robots in visiting order.
    pub fn setpoints(&self) -> Vec<RobotSetpoints> {
        let mut next_id = 0;
        let mut out = Vec::with_capacity(self.robots.len());
        for r in &self.robots {
            let base = Vector3::from(r.base.xyz);
            let mut sps = Vec::new();
            if let Some(s) = &self.setpoints.spherical {
                let c = s.center.map_or(self.scene.plant_center().coords, Vector3::from);
                let lon = (base.y - c.y).atan2(base.x - c.x);
                let w = s.lon_half_width_deg.to_radians();
                let lat = s.lat_range_deg.map(f64::to_radians);
                sps.extend(spherical_arc(c, s.radius, s.rings, s.per_ring, lat, [lon - w, lon + w]));
            }
            if let Some(cy) = &self.setpoints.cylindrical {
                let a = cy.axis_point.map_or(self.scene.pot_base().coords, Vector3::from);
                let lon = (base.y - a.y).atan2(base.x - a.x);
                let w = cy.lon_half_width_deg.to_radians();
                sps.extend(cylindrical_arc(
                    a,
                    cy.radius,
                    &cy.heights,
                    cy.per_ring,
                    [lon - w, lon + w],
                ));
            }
            for sp in &mut sps {
                sp.id = next_id;
                next_id += 1;
            }
            out.push(RobotSetpoints {
                robot: r.name.clone(),
                setpoints: sps,
            });
        }
        out
    }

    pub fn camera_offset(&self) -> Transform {
        self.camera.offset.into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_config_has_120_setpoints() {
        let cfg = ExperimentConfig::bundled();
        let n: usize = cfg.setpoints().iter().map(|r| r.setpoints.len()).sum();
        assert_eq!(n, 120);
        let mut fast = cfg.clone();
        fast.fast_mode();
        let n: usize = fast.setpoints().iter().map(|r| r.setpoints.len()).sum();
        assert_eq!(n, 24);
        assert_eq!((fast.camera.intrinsics.width, fast.camera.intrinsics.height), (160, 90));
    }

    #[test]
    fn transport_parsing() {
        assert_eq!("loopback".parse::<Transport>().unwrap(), Transport::Loopback);
        assert_eq!(
            "ws://127.0.0.1:9090".parse::<Transport>().unwrap(),
            Transport::WebSocket("ws://127.0.0.1:9090".into())
        );
        assert!("tcp://x".parse::<Transport>().is_err());
    }

    #[test]
    fn rejects_unknown_fields_and_schema() {
        let mut v: serde_json::Value = serde_json::from_str(DEFAULT_CONFIG).unwrap();
        v["schema"] = 2.into();
        assert!(ExperimentConfig::from_json(&v.to_string()).is_err());
        let mut v: serde_json::Value = serde_json::from_str(DEFAULT_CONFIG).unwrap();
        v["bogus"] = 1.into();
        assert!(ExperimentConfig::from_json(&v.to_string()).is_err());
    }
}
