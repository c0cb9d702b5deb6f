//! Closed-form inverse kinematics for UR-type 6R arms.
//!
//! The solver works on the product-of-exponentials form of the chain, taken
//! at the zero configuration, so no DH table is needed: any chain whose
//! axes 2, 3 and 4 are parallel, whose axes 4/5 and 5/6 intersect, and whose
//! axis 5 is perpendicular to axis 2 is accepted. The eight branches come
//! from three binary choices (shoulder, wrist, elbow) which are each reduced
//! to a single-angle subproblem.

use nalgebra::{Unit, UnitQuaternion, Vector3};

use super::chain::{JointConfig, KinematicChain};
use super::transform::{wrap_angle, Transform};
use super::KinematicsError;

const GEOM_TOL: f64 = 1e-9;
const RESIDUAL_TOL: f64 = 1e-6;
const DEDUP_TOL: f64 = 1e-6;
/// Relative slack before a tangent solution is declared out of reach.
const TANGENT_SLACK: f64 = 1e-10;
const SINGULAR_TOL: f64 = 1e-9;
/// Two roots closer than this are reported as one.
const MERGE_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IkStatus {
    Reachable,
    Unreachable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkSolutions {
    pub solutions: Vec<JointConfig>,
    pub status: IkStatus,
    /// Set when the wrist is singular; the free angle was fixed at 0.
    pub singular: bool,
}

impl IkSolutions {
    pub fn is_unreachable(&self) -> bool {
        self.status == IkStatus::Unreachable
    }

    fn unreachable() -> Self {
        Self {
            solutions: Vec::new(),
            status: IkStatus::Unreachable,
            singular: false,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Screw {
    axis: Unit<Vector3<f64>>,
    point: Vector3<f64>,
}

impl Screw {
    fn rotation(&self, angle: f64) -> UnitQuaternion<f64> {
        UnitQuaternion::from_axis_angle(&self.axis, angle)
    }

    fn exp(&self, angle: f64) -> Transform {
        let r = self.rotation(angle);
        Transform::new(r, self.point - r * self.point)
    }
}

/// Precomputed solver for one chain.
#[derive(Debug, Clone)]
pub struct UrIkSolver {
    chain: KinematicChain,
    screws: [Screw; 6],
    /// Tool pose at the zero configuration in the chain base frame.
    home: Transform,
    /// Intersection of axes 4 and 5 at zero configuration.
    wrist_a: Vector3<f64>,
    /// Intersection of axes 5 and 6 at zero configuration.
    wrist_b: Vector3<f64>,
}

impl UrIkSolver {
    pub fn new(chain: &KinematicChain) -> Result<Self, KinematicsError> {
        if chain.dof() != 6 {
            return Err(KinematicsError::UnsupportedGeometry(format!(
                "expected 6 revolute joints, chain has {}",
                chain.dof()
            )));
        }
        let mut frame = Transform::identity();
        let screws: [Screw; 6] = std::array::from_fn(|i| {
            let link = &chain.links()[i];
            frame = frame * link.fixed_offset;
            Screw {
                axis: Unit::new_normalize(frame.transform_vector(&link.joint_axis)),
                point: frame.translation,
            }
        });
        let home = frame * *chain.tool_offset();

        let w = |i: usize| screws[i].axis.into_inner();
        let bad = |what: &str| Err(KinematicsError::UnsupportedGeometry(what.to_string()));
        if w(0).dot(&w(1)).abs() > GEOM_TOL {
            return bad("axis 1 must be perpendicular to axis 2");
        }
        if w(1).cross(&w(2)).norm() > GEOM_TOL || w(1).cross(&w(3)).norm() > GEOM_TOL {
            return bad("axes 2, 3 and 4 must be parallel");
        }
        if w(1).dot(&w(4)).abs() > GEOM_TOL {
            return bad("axis 5 must be perpendicular to axis 2");
        }
        let Some(wrist_a) = line_intersection(&screws[3], &screws[4]) else {
            return bad("axes 4 and 5 must intersect");
        };
        let Some(wrist_b) = line_intersection(&screws[4], &screws[5]) else {
            return bad("axes 5 and 6 must intersect");
        };
        if w(4).cross(&w(5)).norm() < 1e-6 {
            return bad("axes 5 and 6 must not be parallel");
        }
        Ok(Self {
            chain: chain.clone(),
            screws,
            home,
            wrist_a,
            wrist_b,
        })
    }

    pub fn chain(&self) -> &KinematicChain {
        &self.chain
    }

    /// All joint solutions reaching `target` (world frame).
    ///
    /// Order is fixed: shoulder branch outermost, then elbow, then wrist,
    /// with the `+acos` root of each subproblem first.
    pub fn solve(&self, target: &Transform) -> IkSolutions {
        let local = self.chain.base_transform().inverse() * *target;
        let g = local * self.home.inverse();
        let [s1, s2, s3, s4, s5, s6] = self.screws;
        let w2 = s2.axis.into_inner();

        // Point where axes 5 and 6 meet, in the chain base frame; it does not
        // depend on joints 5 and 6.
        let wrist_b = g.transform_point(&self.wrist_b);
        // Joints 2..4 rotate about axes parallel to w2, so the w2 component of
        // the wrist point, seen before joint 1, is the zero-pose value.
        let roots1 = solve_projection(
            &w2,
            &(wrist_b - s1.point),
            &s1.axis,
            w2.dot(&self.wrist_b) - w2.dot(&s1.point),
        );
        let Some(roots1) = roots1 else {
            return IkSolutions::unreachable();
        };
        let theta1_list: Vec<f64> = roots1.iter().map(|phi| -phi).collect();

        let axis6_dir = g.transform_vector(&s6.axis);
        let mut found: Vec<((usize, usize, usize), JointConfig)> = Vec::new();
        let mut singular = false;
        let mut any_geometric = false;

        for (b1, &t1) in theta1_list.iter().enumerate() {
            let e1_inv = s1.exp(t1).inverse();
            let d = e1_inv.transform_vector(&axis6_dir);
            let Some(roots5) = solve_projection(&w2, &s6.axis, &s5.axis, w2.dot(&d)) else {
                continue;
            };
            for (b5, &t5) in roots5.iter().enumerate() {
                let g1 = e1_inv * g;
                // g1 = e2 e3 e4 e5 e6
                let rt = g1.rotation;
                let x = rt.inverse() * w2;
                let y = s5.rotation(-t5) * w2;
                let (t6, sing6) = match rotation_angle_about(&s6.axis, &x, &y) {
                    Some(a) => (a, false),
                    None => (0.0, true),
                };
                let wrist_singular = sing6 || roots5.len() == 1;
                let g234 = g1 * s6.exp(t6).inverse() * s5.exp(t5).inverse();
                let c = g234.transform_point(&self.wrist_a);

                let perp = |v: Vector3<f64>| v - w2 * w2.dot(&v);
                let u = perp(self.wrist_a - s3.point);
                let v = perp(s2.point - s3.point);
                let delta2 = perp(c - s2.point).norm_squared();
                let k = 0.5 * (u.norm_squared() + v.norm_squared() - delta2);
                let Some(roots3) = solve_projection(&v, &u, &s3.axis, k) else {
                    continue;
                };
                for (b3, &t3) in roots3.iter().enumerate() {
                    let e = s3.exp(t3).transform_point(&self.wrist_a);
                    let Some(t2) = rotation_angle_about(&s2.axis, &(e - s2.point), &(c - s2.point)) else {
                        continue;
                    };
                    let r4 = (s2.rotation(t2) * s3.rotation(t3)).inverse() * g234.rotation;
                    let t4 = rotation_angle_of(&s4.axis, &r4);
                    any_geometric = true;
                    let Ok(q) = JointConfig::new([t1, t2, t3, t4, t5, t6]) else {
                        continue;
                    };
                    let (dp, da) = self.chain.forward_kinematics(&q).residual(target);
                    if dp > RESIDUAL_TOL || da > RESIDUAL_TOL {
                        continue;
                    }
                    if wrist_singular {
                        singular = true;
                    }
                    found.push(((b1, b3, b5), q));
                }
            }
        }

        if !any_geometric {
            return IkSolutions::unreachable();
        }
        found.sort_by_key(|(branch, _)| *branch);
        let mut solutions: Vec<JointConfig> = Vec::new();
        for (_, q) in found {
            if !self.chain.within_limits(q.as_slice()) {
                continue;
            }
            if solutions.iter().any(|s| s.max_abs_diff(&q) <= DEDUP_TOL) {
                continue;
            }
            solutions.push(q);
        }
        IkSolutions {
            solutions,
            status: IkStatus::Reachable,
            singular,
        }
    }

    /// The solution closest to `seed` under per-joint weights, if any.
    pub fn solve_nearest(&self, target: &Transform, seed: &JointConfig, weights: &[f64; 6]) -> Option<JointConfig> {
        self.solve(target).solutions.into_iter().min_by(|a, b| {
            seed.weighted_distance(a, weights)
                .total_cmp(&seed.weighted_distance(b, weights))
        })
    }
}

/// Free-function form of [`UrIkSolver::solve`].
pub fn inverse_kinematics(chain: &KinematicChain, target: &Transform) -> Result<IkSolutions, KinematicsError> {
    Ok(UrIkSolver::new(chain)?.solve(target))
}

/// Angles θ with `u · Rot(axis, θ) v = k`. Returns `None` when no θ exists.
/// A degenerate equation (θ unconstrained) yields the single root 0.
fn solve_projection(u: &Vector3<f64>, v: &Vector3<f64>, axis: &Unit<Vector3<f64>>, k: f64) -> Option<Vec<f64>> {
    let w = axis.into_inner();
    let v_par = w * w.dot(v);
    let v_perp = v - v_par;
    let a = u.dot(&v_perp);
    let b = u.dot(&w.cross(&v_perp));
    let c = k - u.dot(&v_par);
    let r = a.hypot(b);
    let scale = u.norm() * v.norm();
    if r <= SINGULAR_TOL * scale.max(1.0) {
        return if c.abs() <= 1e-9 * scale.max(1.0) {
            Some(vec![0.0])
        } else {
            None
        };
    }
    let ratio = c / r;
    if ratio.abs() > 1.0 + TANGENT_SLACK {
        return None;
    }
    let base = b.atan2(a);
    let spread = ratio.clamp(-1.0, 1.0).acos();
    if spread < MERGE_TOL {
        return Some(vec![wrap_angle(base)]);
    }
    Some(vec![wrap_angle(base + spread), wrap_angle(base - spread)])
}

/// Signed angle rotating `from` onto `to` about `axis`, using the components
/// perpendicular to the axis. `None` when `from` is parallel to the axis.
fn rotation_angle_about(axis: &Unit<Vector3<f64>>, from: &Vector3<f64>, to: &Vector3<f64>) -> Option<f64> {
    let w = axis.into_inner();
    let x = from - w * w.dot(from);
    let y = to - w * w.dot(to);
    if x.norm() < 1e-9 * from.norm().max(1e-12) || y.norm() < 1e-12 {
        return None;
    }
    Some(w.dot(&x.cross(&y)).atan2(x.dot(&y)))
}

/// Angle of a rotation known to be about `axis`.
fn rotation_angle_of(axis: &Unit<Vector3<f64>>, r: &UnitQuaternion<f64>) -> f64 {
    let w = axis.into_inner();
    let helper = if w.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let v = w.cross(&helper).normalize();
    let rv = r * v;
    w.dot(&v.cross(&rv)).atan2(v.dot(&rv))
}

fn line_intersection(a: &Screw, b: &Screw) -> Option<Vector3<f64>> {
    let (u, v) = (a.axis.into_inner(), b.axis.into_inner());
    let w0 = a.point - b.point;
    let uv = u.dot(&v);
    let denom = 1.0 - uv * uv;
    if denom < 1e-12 {
        return None;
    }
    let s = (uv * v.dot(&w0) - u.dot(&w0)) / denom;
    let t = (v.dot(&w0) - uv * u.dot(&w0)) / denom;
    let pa = a.point + u * s;
    let pb = b.point + v * t;
    ((pa - pb).norm() <= GEOM_TOL).then_some(pa)
}
