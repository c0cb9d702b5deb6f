//! Test-only oracles kept independent of the library's code paths.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Vector3};
use twinlink::kinematics::Transform;
use twinlink::scenecam::{Scene, Shape};

/// Serial chain evaluated as a plain product of 4x4 homogeneous matrices
/// built directly from URDF `origin`/`axis` attributes (Rodrigues rotation,
/// explicit Rz·Ry·Rx), without quaternions.
pub struct MatrixChainOracle {
    base: Matrix4<f64>,
    /// (origin matrix, axis or None for fixed joints)
    steps: Vec<(Matrix4<f64>, Option<Vector3<f64>>)>,
}

fn rpy_matrix(r: f64, p: f64, y: f64) -> Matrix3<f64> {
    let (sr, cr) = r.sin_cos();
    let (sp, cp) = p.sin_cos();
    let (sy, cy) = y.sin_cos();
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cr, -sr, 0.0, sr, cr);
    let ry = Matrix3::new(cp, 0.0, sp, 0.0, 1.0, 0.0, -sp, 0.0, cp);
    let rz = Matrix3::new(cy, -sy, 0.0, sy, cy, 0.0, 0.0, 0.0, 1.0);
    rz * ry * rx
}

fn rodrigues(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let k = axis.normalize();
    let kx = Matrix3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
    Matrix3::identity() + kx * angle.sin() + kx * kx * (1.0 - angle.cos())
}

fn homogeneous(r: Matrix3<f64>, t: Vector3<f64>) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
    m
}

fn nums(s: Option<&str>, default: [f64; 3]) -> [f64; 3] {
    match s {
        None => default,
        Some(s) => {
            let v: Vec<f64> = s.split_whitespace().map(|x| x.parse().unwrap()).collect();
            [v[0], v[1], v[2]]
        }
    }
}

impl MatrixChainOracle {
    pub fn from_urdf(text: &str, tip: &str, base: Matrix4<f64>) -> Self {
        let doc = roxmltree::Document::parse(text).unwrap();
        let joints: Vec<roxmltree::Node> = doc.descendants().filter(|n| n.has_tag_name("joint")).collect();
        let child_of = |j: &roxmltree::Node, tag: &str| {
            j.children()
                .find(|c| c.has_tag_name(tag))
                .and_then(|c| c.attribute("link"))
                .unwrap()
                .to_string()
        };
        let mut steps = Vec::new();
        let mut link = tip.to_string();
        while let Some(j) = joints.iter().find(|j| child_of(j, "child") == link) {
            let origin = j.children().find(|c| c.has_tag_name("origin"));
            let xyz = nums(origin.and_then(|o| o.attribute("xyz")), [0.0; 3]);
            let rpy = nums(origin.and_then(|o| o.attribute("rpy")), [0.0; 3]);
            let m = homogeneous(rpy_matrix(rpy[0], rpy[1], rpy[2]), Vector3::from(xyz));
            let axis = (j.attribute("type") == Some("revolute")).then(|| {
                let a = j.children().find(|c| c.has_tag_name("axis"));
                Vector3::from(nums(a.and_then(|a| a.attribute("xyz")), [1.0, 0.0, 0.0]))
            });
            steps.push((m, axis));
            link = child_of(j, "parent");
        }
        steps.reverse();
        Self { base, steps }
    }

    pub fn forward(&self, q: &[f64]) -> Matrix4<f64> {
        let mut m = self.base;
        let mut qi = q.iter();
        for (origin, axis) in &self.steps {
            m *= origin;
            if let Some(a) = axis {
                let angle = *qi.next().expect("too few joint values");
                m *= homogeneous(rodrigues(a, angle), Vector3::zeros());
            }
        }
        m
    }

    /// World origin of every revolute joint frame, then the tip position.
    pub fn joint_origins(&self, q: &[f64]) -> Vec<Vector3<f64>> {
        let mut m = self.base;
        let mut qi = q.iter();
        let mut out = Vec::new();
        for (origin, axis) in &self.steps {
            m *= origin;
            if let Some(a) = axis {
                out.push(Vector3::new(m[(0, 3)], m[(1, 3)], m[(2, 3)]));
                let angle = *qi.next().expect("too few joint values");
                m *= homogeneous(rodrigues(a, angle), Vector3::zeros());
            }
        }
        out.push(Vector3::new(m[(0, 3)], m[(1, 3)], m[(2, 3)]));
        out
    }
}

/// Translation distance and rotation angle between a pose and a 4x4 matrix.
pub fn pose_vs_matrix(pose: &Transform, m: &Matrix4<f64>) -> (f64, f64) {
    let t = Vector3::new(m[(0, 3)], m[(1, 3)], m[(2, 3)]);
    let r = m.fixed_view::<3, 3>(0, 0).into_owned();
    let rel = pose.rotation_matrix().transpose() * r;
    let cos = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    // acos loses precision near 0; use the skew part instead
    let skew = Vector3::new(
        rel[(2, 1)] - rel[(1, 2)],
        rel[(0, 2)] - rel[(2, 0)],
        rel[(1, 0)] - rel[(0, 1)],
    );
    let angle = (skew.norm() / 2.0).atan2(cos);
    ((pose.translation - t).norm(), angle)
}

/// Exact signed distance to a primitive (negative inside).
pub fn sdf(shape: &Shape, p: &Vector3<f64>) -> f64 {
    match *shape {
        Shape::Plane { normal, offset } => normal.dot(p) - offset,
        Shape::Sphere { center, radius } => (p - center.coords).norm() - radius,
        Shape::Box { center, half_extents } => {
            let q = (p - center.coords).abs() - half_extents;
            q.map(|c| c.max(0.0)).norm() + q.max().min(0.0)
        }
        Shape::Cylinder { base, radius, height } => {
            let rel = p - base.coords;
            let dr = rel.xy().norm() - radius;
            let dz = (rel.z - height / 2.0).abs() - height / 2.0;
            let outside = (dr.max(0.0).powi(2) + dz.max(0.0).powi(2)).sqrt();
            outside + dr.max(dz).min(0.0)
        }
    }
}

/// First surface crossing of one primitive along a ray, by sphere tracing on
/// the exact distance field (minimum step 1e-9 m) followed by bisection.
pub fn march_first_hit(shape: &Shape, origin: &Vector3<f64>, dir: &Vector3<f64>, t_max: f64) -> Option<f64> {
    let f = |t: f64| sdf(shape, &(origin + dir * t));
    let mut t = 1e-6;
    let mut d = f(t);
    if d <= 0.0 {
        return None;
    }
    let mut iters = 0u64;
    while t < t_max && iters < 5_000_000 {
        iters += 1;
        let t_next = t + d.max(1e-9);
        let d_next = f(t_next);
        if d_next <= 0.0 {
            let (mut lo, mut hi) = (t, t_next);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if f(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(hi);
        }
        t = t_next;
        d = d_next;
    }
    None
}

/// Brute-force nearest hit: every primitive marched independently.
pub fn oracle_intersect(scene: &Scene, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<(f64, u32)> {
    let mut best: Option<(f64, u32)> = None;
    for o in &scene.objects {
        for s in &o.shapes {
            let limit = best.map_or(1e7, |b| b.0 + 1e-6);
            if let Some(t) = march_first_hit(s, origin, dir, limit) {
                if best.is_none_or(|b| t < b.0) {
                    best = Some((t, o.id));
                }
            }
        }
    }
    best
}

/// Algebraic (Kasa) least-squares circle fit; returns (centre, radius).
pub fn kasa_circle_fit(points: &[[f64; 2]]) -> ([f64; 2], f64) {
    let a = DMatrix::from_fn(points.len(), 3, |i, j| match j {
        0 => points[i][0],
        1 => points[i][1],
        _ => 1.0,
    });
    let b = DVector::from_fn(points.len(), |i, _| -(points[i][0].powi(2) + points[i][1].powi(2)));
    let sol = a.svd(true, true).solve(&b, 1e-14).expect("circle fit");
    let (d, e, f) = (sol[0], sol[1], sol[2]);
    let c = [-d / 2.0, -e / 2.0];
    (c, (c[0] * c[0] + c[1] * c[1] - f).sqrt())
}
