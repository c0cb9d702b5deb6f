//! Parser for the kinematic subset of URDF.
//!
//! Only `robot`, `link` and `joint` elements are read, and only `revolute`
//! and `fixed` joints are accepted. Visual, collision and inertial data are
//! ignored. The joint tree is reduced to the single serial path from the
//! root link to the tool link; fixed joints on that path are folded into the
//! offset of the next revolute link, or into the tool offset when they trail
//! the last revolute joint.

use std::collections::BTreeMap;

use nalgebra::{Unit, Vector3};

use super::chain::{ChainLink, KinematicChain};
use super::transform::Transform;
use super::KinematicsError;

/// Link name preferred as the tool frame when several leaves qualify.
pub const DEFAULT_TOOL_LINK: &str = "tool0";

#[derive(Debug, Clone)]
struct RawJoint {
    name: String,
    kind: JointKind,
    parent: String,
    child: String,
    origin: Transform,
    axis: Vector3<f64>,
    limits: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum JointKind {
    Revolute,
    Fixed,
}

/// Parses URDF text into a serial chain ending at the tool link.
///
/// The tool link is the leaf whose path from the root crosses the most
/// revolute joints; ties are resolved in favour of a leaf named `tool0`.
pub fn parse_urdf(text: &str) -> Result<KinematicChain, KinematicsError> {
    parse_urdf_with_tip(text, None)
}

/// Same as [`parse_urdf`] with an explicit tool link.
pub fn parse_urdf_with_tip(text: &str, tip: Option<&str>) -> Result<KinematicChain, KinematicsError> {
    let doc = roxmltree::Document::parse(text).map_err(|e| {
        let pos = e.pos();
        KinematicsError::Parse {
            line: pos.row,
            column: pos.col,
            message: e.to_string(),
        }
    })?;
    let root = doc.root_element();
    if root.tag_name().name() != "robot" {
        return Err(parse_err(&doc, root, "root element must be <robot>"));
    }

    let mut links: Vec<String> = Vec::new();
    let mut joints: Vec<RawJoint> = Vec::new();
    for node in root.children().filter(|n| n.is_element()) {
        match node.tag_name().name() {
            "link" => {
                let name = required_attr(&doc, node, "name")?;
                if links.iter().any(|l| l == name) {
                    return Err(KinematicsError::Structure(format!("duplicate link `{name}`")));
                }
                links.push(name.to_string());
            }
            "joint" => joints.push(read_joint(&doc, node)?),
            _ => {}
        }
    }
    if links.is_empty() {
        return Err(KinematicsError::Structure("robot has no links".into()));
    }

    // child link -> joint index
    let mut parent_joint: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, j) in joints.iter().enumerate() {
        for end in [&j.parent, &j.child] {
            if !links.contains(end) {
                return Err(KinematicsError::Structure(format!(
                    "joint `{}` references unknown link `{end}`",
                    j.name
                )));
            }
        }
        if parent_joint.insert(j.child.as_str(), i).is_some() {
            return Err(KinematicsError::Structure(format!(
                "link `{}` has more than one parent joint",
                j.child
            )));
        }
    }
    let roots: Vec<&String> = links
        .iter()
        .filter(|l| !parent_joint.contains_key(l.as_str()))
        .collect();
    if roots.len() != 1 {
        return Err(KinematicsError::Structure(format!(
            "expected exactly one root link, found {} ({})",
            roots.len(),
            roots.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
        )));
    }
    let root_link = roots[0].as_str();

    // Walk every link up to the root; this also catches cycles and islands.
    let mut paths: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for link in &links {
        let mut path = Vec::new();
        let mut cur = link.as_str();
        while let Some(&ji) = parent_joint.get(cur) {
            path.push(ji);
            if path.len() > joints.len() {
                return Err(KinematicsError::Structure(format!(
                    "cycle detected through link `{link}`"
                )));
            }
            cur = joints[ji].parent.as_str();
        }
        if cur != root_link {
            return Err(KinematicsError::Structure(format!(
                "link `{link}` is not connected to root `{root_link}`"
            )));
        }
        path.reverse();
        paths.insert(link.as_str(), path);
    }

    let tip_link = match tip {
        Some(t) => {
            if !paths.contains_key(t) {
                return Err(KinematicsError::Structure(format!("unknown tool link `{t}`")));
            }
            t
        }
        None => pick_tip(&links, &joints, &paths)?,
    };

    let path = &paths[tip_link];
    let mut chain_links = Vec::new();
    let mut pending = Transform::identity();
    for &ji in path {
        let j = &joints[ji];
        pending = pending * j.origin;
        if j.kind == JointKind::Revolute {
            let [lo, hi] = j.limits.expect("revolute joints always carry limits");
            chain_links.push(ChainLink {
                name: j.name.clone(),
                fixed_offset: pending,
                joint_axis: Unit::new_normalize(j.axis),
                joint_limits: [lo, hi],
            });
            pending = Transform::identity();
        }
    }
    Ok(KinematicChain::new(
        Transform::identity(),
        chain_links,
        pending,
        root_link.to_string(),
        tip_link.to_string(),
    ))
}

fn pick_tip<'a>(
    links: &'a [String],
    joints: &[RawJoint],
    paths: &BTreeMap<&str, Vec<usize>>,
) -> Result<&'a str, KinematicsError> {
    let has_child: Vec<&str> = joints.iter().map(|j| j.parent.as_str()).collect();
    let leaves: Vec<&str> = links
        .iter()
        .map(String::as_str)
        .filter(|l| !has_child.contains(l))
        .collect();
    let revolute_count = |l: &str| {
        paths[l]
            .iter()
            .filter(|&&ji| joints[ji].kind == JointKind::Revolute)
            .count()
    };
    let best = leaves.iter().map(|l| revolute_count(l)).max().unwrap_or(0);
    let candidates: Vec<&str> = leaves.into_iter().filter(|l| revolute_count(l) == best).collect();
    match candidates.as_slice() {
        [one] => Ok(one),
        many if many.contains(&DEFAULT_TOOL_LINK) => Ok(DEFAULT_TOOL_LINK),
        many => Err(KinematicsError::Structure(format!(
            "ambiguous tool link, candidates: {}",
            many.join(", ")
        ))),
    }
}

fn read_joint(doc: &roxmltree::Document, node: roxmltree::Node) -> Result<RawJoint, KinematicsError> {
    let name = required_attr(doc, node, "name")?.to_string();
    let kind = match required_attr(doc, node, "type")? {
        "revolute" => JointKind::Revolute,
        "fixed" => JointKind::Fixed,
        other => {
            return Err(KinematicsError::Unsupported(format!(
                "joint `{name}` has type `{other}`; only revolute and fixed joints are supported"
            )))
        }
    };
    let child_elem = |tag: &str| node.children().find(|c| c.has_tag_name(tag));
    let link_ref = |tag: &str| -> Result<String, KinematicsError> {
        let el = child_elem(tag).ok_or_else(|| parse_err(doc, node, &format!("joint `{name}` is missing <{tag}>")))?;
        Ok(required_attr(doc, el, "link")?.to_string())
    };
    let parent = link_ref("parent")?;
    let child = link_ref("child")?;

    let origin = match child_elem("origin") {
        Some(o) => {
            let xyz = vec3_attr(doc, o, "xyz")?.unwrap_or([0.0; 3]);
            let rpy = vec3_attr(doc, o, "rpy")?.unwrap_or([0.0; 3]);
            Transform::from_xyz_rpy(xyz, rpy)
        }
        None => Transform::identity(),
    };
    let axis = match child_elem("axis") {
        Some(a) => vec3_attr(doc, a, "xyz")?.unwrap_or([1.0, 0.0, 0.0]),
        None => [1.0, 0.0, 0.0],
    };
    let axis = Vector3::from(axis);
    let limits = match (kind, child_elem("limit")) {
        (JointKind::Fixed, _) => None,
        (JointKind::Revolute, Some(l)) => {
            let lo = f64_attr(doc, l, "lower")?.unwrap_or(0.0);
            let hi = f64_attr(doc, l, "upper")?.unwrap_or(0.0);
            if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
                return Err(KinematicsError::Structure(format!(
                    "joint `{name}` has limits [{lo}, {hi}]; lower must be below upper"
                )));
            }
            Some([lo, hi])
        }
        (JointKind::Revolute, None) => {
            return Err(parse_err(
                doc,
                node,
                &format!("revolute joint `{name}` is missing <limit>"),
            ))
        }
    };
    if kind == JointKind::Revolute && !(axis.norm() > 1e-12) {
        return Err(KinematicsError::Structure(format!("joint `{name}` has a zero axis")));
    }
    Ok(RawJoint {
        name,
        kind,
        parent,
        child,
        origin,
        axis,
        limits,
    })
}

fn parse_err(doc: &roxmltree::Document, node: roxmltree::Node, message: &str) -> KinematicsError {
    let pos = doc.text_pos_at(node.range().start);
    KinematicsError::Parse {
        line: pos.row,
        column: pos.col,
        message: message.to_string(),
    }
}

fn required_attr<'a>(
    doc: &roxmltree::Document,
    node: roxmltree::Node<'a, '_>,
    attr: &str,
) -> Result<&'a str, KinematicsError> {
    node.attribute(attr).ok_or_else(|| {
        parse_err(
            doc,
            node,
            &format!("<{}> is missing attribute `{attr}`", node.tag_name().name()),
        )
    })
}

fn f64_attr(doc: &roxmltree::Document, node: roxmltree::Node, attr: &str) -> Result<Option<f64>, KinematicsError> {
    match node.attribute(attr) {
        None => Ok(None),
        Some(s) => s
            .trim()
            .parse::<f64>()
            .map(Some)
            .map_err(|_| parse_err(doc, node, &format!("attribute `{attr}` is not a number: `{s}`"))),
    }
}

fn vec3_attr(
    doc: &roxmltree::Document,
    node: roxmltree::Node,
    attr: &str,
) -> Result<Option<[f64; 3]>, KinematicsError> {
    let Some(s) = node.attribute(attr) else {
        return Ok(None);
    };
    let vals: Result<Vec<f64>, _> = s.split_whitespace().map(str::parse::<f64>).collect();
    match vals {
        Ok(v) if v.len() == 3 => Ok(Some([v[0], v[1], v[2]])),
        _ => Err(parse_err(
            doc,
            node,
            &format!("attribute `{attr}` must hold three numbers, got `{s}`"),
        )),
    }
}

/// The UR10 description shipped with the crate.
pub fn bundled_ur10_urdf() -> &'static str {
    include_str!("../../assets/ur10.urdf")
}
