use std::fmt::Write as _;
use std::ops::Index;

use nalgebra::{Unit, Vector3};
use serde::{Deserialize, Serialize};

use super::transform::{wrap_angle, Transform};
use super::KinematicsError;

/// Six joint angles in radians, each wrapped into `(-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 6]", into = "[f64; 6]")]
pub struct JointConfig([f64; 6]);

impl JointConfig {
    pub const ZERO: JointConfig = JointConfig([0.0; 6]);

    pub fn new(angles: [f64; 6]) -> Result<Self, KinematicsError> {
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(KinematicsError::NonFinite);
        }
        Ok(Self(angles.map(wrap_angle)))
    }

    pub fn from_slice(angles: &[f64]) -> Result<Self, KinematicsError> {
        let arr: [f64; 6] = angles.try_into().map_err(|_| KinematicsError::WrongDof {
            expected: 6,
            got: angles.len(),
        })?;
        Self::new(arr)
    }

    pub fn angles(&self) -> &[f64; 6] {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Per-joint shortest signed difference `other - self`.
    pub fn delta_to(&self, other: &JointConfig) -> [f64; 6] {
        std::array::from_fn(|i| wrap_angle(other.0[i] - self.0[i]))
    }

    /// L∞ distance along the shortest arcs.
    pub fn max_abs_diff(&self, other: &JointConfig) -> f64 {
        self.delta_to(other).iter().fold(0.0, |m, d| m.max(d.abs()))
    }

    pub fn weighted_distance(&self, other: &JointConfig, weights: &[f64; 6]) -> f64 {
        self.delta_to(other)
            .iter()
            .zip(weights)
            .map(|(d, w)| w * d * d)
            .sum::<f64>()
            .sqrt()
    }
}

impl TryFrom<[f64; 6]> for JointConfig {
    type Error = KinematicsError;
    fn try_from(a: [f64; 6]) -> Result<Self, Self::Error> {
        JointConfig::new(a)
    }
}

impl From<JointConfig> for [f64; 6] {
    fn from(q: JointConfig) -> Self {
        q.0
    }
}

impl Index<usize> for JointConfig {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainLink {
    pub name: String,
    /// Offset from the previous joint frame (or the chain base) to this joint frame.
    pub fixed_offset: Transform,
    pub joint_axis: Unit<Vector3<f64>>,
    pub joint_limits: [f64; 2],
}

/// Serial chain of revolute joints: `base ∘ Π(offset_i ∘ Rot(axis_i, q_i)) ∘ tool`.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicChain {
    base_transform: Transform,
    links: Vec<ChainLink>,
    tool_offset: Transform,
    root_link: String,
    tip_link: String,
}

impl KinematicChain {
    pub fn new(
        base_transform: Transform,
        links: Vec<ChainLink>,
        tool_offset: Transform,
        root_link: String,
        tip_link: String,
    ) -> Self {
        Self {
            base_transform,
            links,
            tool_offset,
            root_link,
            tip_link,
        }
    }

    pub fn with_base(mut self, base: Transform) -> Self {
        self.base_transform = base;
        self
    }

    pub fn base_transform(&self) -> &Transform {
        &self.base_transform
    }

    pub fn links(&self) -> &[ChainLink] {
        &self.links
    }

    pub fn tool_offset(&self) -> &Transform {
        &self.tool_offset
    }

    pub fn tip_link(&self) -> &str {
        &self.tip_link
    }

    pub fn root_link(&self) -> &str {
        &self.root_link
    }

    pub fn dof(&self) -> usize {
        self.links.len()
    }

    pub fn joint_names(&self) -> Vec<&str> {
        self.links.iter().map(|l| l.name.as_str()).collect()
    }

    /// Tool pose in the world frame.
    ///
    /// Panics if `q.len()` differs from [`Self::dof`].
    pub fn forward(&self, q: &[f64]) -> Transform {
        assert_eq!(q.len(), self.links.len(), "joint vector length must match chain dof");
        let mut pose = self.base_transform;
        for (link, &angle) in self.links.iter().zip(q) {
            pose = pose * link.fixed_offset * Transform::from_axis_angle(&link.joint_axis, angle);
        }
        pose * self.tool_offset
    }

    pub fn forward_kinematics(&self, q: &JointConfig) -> Transform {
        self.forward(q.as_slice())
    }

    /// World positions of every joint frame followed by the tool position.
    pub fn joint_positions(&self, q: &[f64]) -> Vec<Vector3<f64>> {
        assert_eq!(q.len(), self.links.len(), "joint vector length must match chain dof");
        let mut out = Vec::with_capacity(self.links.len() + 1);
        let mut pose = self.base_transform;
        for (link, &angle) in self.links.iter().zip(q) {
            pose = pose * link.fixed_offset;
            out.push(pose.translation);
            pose = pose * Transform::from_axis_angle(&link.joint_axis, angle);
        }
        out.push((pose * self.tool_offset).translation);
        out
    }

    /// Indices of joints outside their limits.
    pub fn limit_violations(&self, q: &[f64]) -> Vec<usize> {
        self.links
            .iter()
            .zip(q)
            .enumerate()
            .filter(|(_, (l, &a))| a < l.joint_limits[0] || a > l.joint_limits[1])
            .map(|(i, _)| i)
            .collect()
    }

    pub fn within_limits(&self, q: &[f64]) -> bool {
        self.limit_violations(q).is_empty()
    }

    /// Minimal URDF describing exactly this chain (base transform excluded).
    /// Parsing the output yields an equivalent chain.
    pub fn to_urdf_summary(&self, robot_name: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "<robot name=\"{robot_name}\">");
        let mut names = vec![self.root_link.clone()];
        for l in &self.links {
            names.push(format!("{}_child", l.name));
        }
        let tip_differs = self.tool_offset != Transform::identity() || self.links.is_empty();
        if tip_differs {
            names.push(self.tip_link.clone());
        } else if let Some(last) = names.last_mut() {
            *last = self.tip_link.clone();
        }
        for n in &names {
            let _ = writeln!(s, "  <link name=\"{n}\"/>");
        }
        let origin = |t: &Transform| {
            let p = t.translation;
            let r = t.rpy();
            format!(
                "<origin xyz=\"{:?} {:?} {:?}\" rpy=\"{:?} {:?} {:?}\"/>",
                p.x, p.y, p.z, r[0], r[1], r[2]
            )
        };
        for (i, l) in self.links.iter().enumerate() {
            let a = l.joint_axis;
            let _ = writeln!(
                s,
                "  <joint name=\"{}\" type=\"revolute\"><parent link=\"{}\"/><child link=\"{}\"/>{}<axis xyz=\"{:?} {:?} {:?}\"/><limit lower=\"{:?}\" upper=\"{:?}\"/></joint>",
                l.name,
                names[i],
                names[i + 1],
                origin(&l.fixed_offset),
                a.x,
                a.y,
                a.z,
                l.joint_limits[0],
                l.joint_limits[1]
            );
        }
        if tip_differs {
            let n = names.len();
            let _ = writeln!(
                s,
                "  <joint name=\"{}_fixed_joint\" type=\"fixed\"><parent link=\"{}\"/><child link=\"{}\"/>{}</joint>",
                self.tip_link,
                names[n - 2],
                names[n - 1],
                origin(&self.tool_offset)
            );
        }
        s.push_str("</robot>\n");
        s
    }
}
