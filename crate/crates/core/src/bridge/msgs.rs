//! Typed payloads carried in the `msg` field, laid out as their ROS
//! counterparts (`sensor_msgs/JointState`, `std_msgs/Bool`,
//! `geometry_msgs/TransformStamped`).

use std::collections::BTreeSet;

use nalgebra::Vector3;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::BridgeError;
use crate::kinematics::Transform;

pub const JOINT_STATE_TYPE: &str = "sensor_msgs/JointState";
pub const BOOL_TYPE: &str = "std_msgs/Bool";
pub const TRANSFORM_STAMPED_TYPE: &str = "geometry_msgs/TransformStamped";
pub const CLOCK_TYPE: &str = "rosgraph_msgs/Clock";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
pub struct Stamp {
    pub secs: i64,
    pub nsecs: u32,
}

impl Stamp {
    /// Rounds to the nearest nanosecond.
    pub fn from_secs_f64(t: f64) -> Self {
        let total = (t * 1e9).round() as i64;
        Self {
            secs: total.div_euclid(1_000_000_000),
            nsecs: total.rem_euclid(1_000_000_000) as u32,
        }
    }

    pub fn as_nanos(&self) -> i128 {
        self.secs as i128 * 1_000_000_000 + self.nsecs as i128
    }

    pub fn as_secs_f64(&self) -> f64 {
        self.secs as f64 + self.nsecs as f64 * 1e-9
    }

    fn validate(&self) -> Result<(), BridgeError> {
        if self.nsecs >= 1_000_000_000 {
            return Err(schema("header.stamp.nsecs", "must be below 1e9"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Header {
    pub stamp: Stamp,
    #[serde(default)]
    pub frame_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointStateMsg {
    pub header: Header,
    pub name: Vec<String>,
    pub position: Vec<f64>,
    #[serde(default)]
    pub velocity: Vec<f64>,
    #[serde(default)]
    pub effort: Vec<f64>,
}

impl JointStateMsg {
    pub fn new(stamp: Stamp, name: Vec<String>, position: Vec<f64>) -> Result<Self, BridgeError> {
        let m = Self {
            header: Header {
                stamp,
                frame_id: String::new(),
            },
            name,
            position,
            velocity: Vec::new(),
            effort: Vec::new(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn stamp(&self) -> Stamp {
        self.header.stamp
    }

    pub fn validate(&self) -> Result<(), BridgeError> {
        self.header.stamp.validate()?;
        if self.name.len() != self.position.len() {
            return Err(schema(
                "position",
                &format!("{} names but {} positions", self.name.len(), self.position.len()),
            ));
        }
        if !self.velocity.is_empty() && self.velocity.len() != self.name.len() {
            return Err(schema("velocity", "length must match name or be empty"));
        }
        let unique: BTreeSet<&str> = self.name.iter().map(String::as_str).collect();
        if unique.len() != self.name.len() {
            return Err(schema("name", "joint names must be unique"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoolMsg {
    pub data: bool,
}

/// Simulation time broadcast by the planner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClockMsg {
    pub clock: Stamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vector3Msg {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuaternionMsg {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformMsg {
    pub translation: Vector3Msg,
    pub rotation: QuaternionMsg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformStampedMsg {
    pub header: Header,
    pub child_frame_id: String,
    pub transform: TransformMsg,
}

impl TransformStampedMsg {
    pub fn from_pose(stamp: Stamp, frame_id: &str, child_frame_id: &str, pose: &Transform) -> Self {
        let [w, x, y, z] = pose.wxyz();
        let t = pose.translation;
        Self {
            header: Header {
                stamp,
                frame_id: frame_id.to_string(),
            },
            child_frame_id: child_frame_id.to_string(),
            transform: TransformMsg {
                translation: Vector3Msg { x: t.x, y: t.y, z: t.z },
                rotation: QuaternionMsg { x, y, z, w },
            },
        }
    }

    pub fn pose(&self) -> Transform {
        let r = self.transform.rotation;
        let t = self.transform.translation;
        Transform::from_wxyz([r.w, r.x, r.y, r.z], Vector3::new(t.x, t.y, t.z))
    }

    pub fn validate(&self) -> Result<(), BridgeError> {
        self.header.stamp.validate()?;
        let r = self.transform.rotation;
        let n = (r.x * r.x + r.y * r.y + r.z * r.z + r.w * r.w).sqrt();
        if (n - 1.0).abs() > 1e-6 {
            return Err(schema("transform.rotation", "quaternion must have unit norm"));
        }
        Ok(())
    }
}

/// Payload types that can travel in a publish envelope.
pub trait Payload: Serialize + DeserializeOwned {
    const TYPE: &'static str;

    fn check(&self) -> Result<(), BridgeError> {
        Ok(())
    }

    fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("payload serialization cannot fail")
    }

    fn from_value(v: &Value) -> Result<Self, BridgeError> {
        let out: Self = serde_path_error(v)?;
        out.check()?;
        Ok(out)
    }
}

fn serde_path_error<T: DeserializeOwned>(v: &Value) -> Result<T, BridgeError> {
    T::deserialize(v).map_err(|e| {
        let text = e.to_string();
        // serde reports "missing field `x`"; surface the field name
        let field = text
            .split('`')
            .nth(1)
            .map(str::to_string)
            .unwrap_or_else(|| "msg".to_string());
        BridgeError::Schema { field, reason: text }
    })
}

impl Payload for JointStateMsg {
    const TYPE: &'static str = JOINT_STATE_TYPE;
    fn check(&self) -> Result<(), BridgeError> {
        self.validate()
    }
}

impl Payload for BoolMsg {
    const TYPE: &'static str = BOOL_TYPE;
}

impl Payload for ClockMsg {
    const TYPE: &'static str = CLOCK_TYPE;
    fn check(&self) -> Result<(), BridgeError> {
        self.clock.validate()
    }
}

impl Payload for TransformStampedMsg {
    const TYPE: &'static str = TRANSFORM_STAMPED_TYPE;
    fn check(&self) -> Result<(), BridgeError> {
        self.validate()
    }
}

fn schema(field: &str, reason: &str) -> BridgeError {
    BridgeError::Schema {
        field: field.to_string(),
        reason: reason.to_string(),
    }
}
