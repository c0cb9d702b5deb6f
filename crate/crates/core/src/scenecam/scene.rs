use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ScenecamError;

/// Rays closer than this to their origin do not count as hits.
pub const RAY_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// Points with `normal · p = offset`.
    Plane {
        normal: Vector3<f64>,
        offset: f64,
    },
    /// Axis-aligned box.
    Box {
        center: Point3<f64>,
        half_extents: Vector3<f64>,
    },
    /// Capped cylinder with a vertical axis; `base` is the centre of the bottom cap.
    Cylinder {
        base: Point3<f64>,
        radius: f64,
        height: f64,
    },
    Sphere {
        center: Point3<f64>,
        radius: f64,
    },
}

impl Shape {
    /// Nearest hit with `t ≥ RAY_EPSILON`; `dir` must be unit length.
    pub fn intersect(&self, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<(f64, Vector3<f64>)> {
        match *self {
            Shape::Plane { normal, offset } => {
                let denom = normal.dot(dir);
                if denom.abs() < 1e-300 {
                    return None;
                }
                let t = (offset - normal.dot(&origin.coords)) / denom;
                (t >= RAY_EPSILON).then(|| (t, if denom < 0.0 { normal } else { -normal }))
            }
            Shape::Box { center, half_extents } => intersect_box(origin, dir, &center, &half_extents),
            Shape::Cylinder { base, radius, height } => intersect_cylinder(origin, dir, &base, radius, height),
            Shape::Sphere { center, radius } => {
                let oc = origin - center;
                let b = oc.dot(dir);
                let c = oc.norm_squared() - radius * radius;
                let disc = b * b - c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                // stable pair of roots
                let q = -b - sq.copysign(b);
                let (mut t0, mut t1) = if q == 0.0 { (0.0, 0.0) } else { (q, c / q) };
                if t0 > t1 {
                    std::mem::swap(&mut t0, &mut t1);
                }
                let t = if t0 >= RAY_EPSILON {
                    t0
                } else if t1 >= RAY_EPSILON {
                    t1
                } else {
                    return None;
                };
                let n = (origin + dir * t - center) / radius;
                Some((t, n))
            }
        }
    }

    fn validate(&self) -> Result<(), String> {
        let ok = match *self {
            Shape::Plane { normal, offset } => (normal.norm() - 1.0).abs() < 1e-9 && offset.is_finite(),
            Shape::Box { half_extents, .. } => half_extents.iter().all(|h| *h > 0.0),
            Shape::Cylinder { radius, height, .. } => radius > 0.0 && height > 0.0,
            Shape::Sphere { radius, .. } => radius > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(format!("degenerate shape {self:?}"))
        }
    }
}

fn intersect_box(
    origin: &Point3<f64>,
    dir: &Vector3<f64>,
    center: &Point3<f64>,
    half: &Vector3<f64>,
) -> Option<(f64, Vector3<f64>)> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    let mut near_axis = 0;
    let mut far_axis = 0;
    for i in 0..3 {
        let lo = center[i] - half[i];
        let hi = center[i] + half[i];
        if dir[i] == 0.0 {
            if origin[i] < lo || origin[i] > hi {
                return None;
            }
            continue;
        }
        let inv = 1.0 / dir[i];
        let (mut a, mut b) = ((lo - origin[i]) * inv, (hi - origin[i]) * inv);
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        if a > t_near {
            t_near = a;
            near_axis = i;
        }
        if b < t_far {
            t_far = b;
            far_axis = i;
        }
    }
    if t_near > t_far {
        return None;
    }
    let mut n = Vector3::zeros();
    if t_near >= RAY_EPSILON {
        n[near_axis] = -dir[near_axis].signum();
        Some((t_near, n))
    } else if t_far >= RAY_EPSILON {
        n[far_axis] = dir[far_axis].signum();
        Some((t_far, n))
    } else {
        None
    }
}

fn intersect_cylinder(
    origin: &Point3<f64>,
    dir: &Vector3<f64>,
    base: &Point3<f64>,
    radius: f64,
    height: f64,
) -> Option<(f64, Vector3<f64>)> {
    let mut best: Option<(f64, Vector3<f64>)> = None;
    let mut consider = |t: f64, n: Vector3<f64>| {
        if t >= RAY_EPSILON && best.is_none_or(|(bt, _)| t < bt) {
            best = Some((t, n));
        }
    };
    let ox = origin.x - base.x;
    let oy = origin.y - base.y;
    let a = dir.x * dir.x + dir.y * dir.y;
    if a > 0.0 {
        let b = ox * dir.x + oy * dir.y;
        let c = ox * ox + oy * oy - radius * radius;
        let disc = b * b - a * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let q = -b - sq.copysign(b);
            for t in [q / a, if q != 0.0 { c / q } else { f64::NAN }] {
                if !t.is_finite() {
                    continue;
                }
                let z = origin.z + t * dir.z - base.z;
                if (0.0..=height).contains(&z) {
                    let n = Vector3::new(ox + t * dir.x, oy + t * dir.y, 0.0) / radius;
                    consider(t, n);
                }
            }
        }
    }
    if dir.z != 0.0 {
        for (zc, nz) in [(base.z, -1.0), (base.z + height, 1.0)] {
            let t = (zc - origin.z) / dir.z;
            let x = ox + t * dir.x;
            let y = oy + t * dir.y;
            if x * x + y * y <= radius * radius {
                consider(t, Vector3::new(0.0, 0.0, nz));
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub id: u32,
    pub name: String,
    pub shapes: Vec<Shape>,
    pub albedo: [f64; 3],
    pub seg_color: [u8; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Light {
    pub position: Point3<f64>,
    pub intensity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub id: u32,
    pub normal: Vector3<f64>,
}

/// Object id reported for rays that escape the scene.
pub const BACKGROUND_ID: u32 = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub objects: Vec<SceneObject>,
    pub lights: Vec<Light>,
    pub background: [u8; 3],
}

/// Tunable dimensions of the bundled desk scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneParams {
    pub table_center: [f64; 3],
    pub table_half_extents: [f64; 3],
    pub pot_radius: f64,
    pub pot_height: f64,
    pub plant_spheres: usize,
    pub stand_x: f64,
    pub stand_half_extents: [f64; 3],
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            table_center: [0.0, 0.0, 0.375],
            table_half_extents: [0.4, 0.4, 0.375],
            pot_radius: 0.15,
            pot_height: 0.3,
            plant_spheres: 7,
            stand_x: 0.9,
            stand_half_extents: [0.15, 0.15, 0.4],
        }
    }
}

impl SceneParams {
    pub fn table_box(&self) -> (Point3<f64>, Vector3<f64>) {
        (self.table_center.into(), self.table_half_extents.into())
    }

    /// Stand boxes for the left (−x) and right (+x) robot.
    pub fn stand_boxes(&self) -> [(Point3<f64>, Vector3<f64>); 2] {
        let h: Vector3<f64> = self.stand_half_extents.into();
        [-1.0, 1.0].map(|s| (Point3::new(s * self.stand_x, 0.0, h.z), h))
    }

    /// Top of the stand, where a robot base is mounted.
    pub fn stand_top(&self) -> f64 {
        2.0 * self.stand_half_extents[2]
    }

    pub fn pot_base(&self) -> Point3<f64> {
        let top = self.table_center[2] + self.table_half_extents[2];
        Point3::new(self.table_center[0], self.table_center[1], top)
    }

    /// Approximate centre of the plant foliage.
    pub fn plant_center(&self) -> Point3<f64> {
        self.pot_base() + Vector3::new(0.0, 0.0, self.pot_height + 0.12)
    }
}

impl Scene {
    /// Desk scene: floor, table, pot, a sphere-cluster plant, two robot
    /// stands, two ceiling lights and two stand lights. The seed jitters the
    /// plant.
    pub fn desk(params: &SceneParams, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (table_c, table_h) = params.table_box();
        let pot_base = params.pot_base();
        let plant_c = params.plant_center();
        let plant = (0..params.plant_spheres)
            .map(|i| {
                let ang = i as f64 / params.plant_spheres as f64 * std::f64::consts::TAU + rng.gen_range(-0.3..0.3);
                let ring = if i == 0 { 0.0 } else { rng.gen_range(0.05..0.1) };
                let dz = rng.gen_range(-0.04..0.06);
                Shape::Sphere {
                    center: plant_c + Vector3::new(ring * ang.cos(), ring * ang.sin(), dz),
                    radius: rng.gen_range(0.05..0.08),
                }
            })
            .collect();
        let [left, right] = params.stand_boxes();
        let boxed = |(center, half_extents): (Point3<f64>, Vector3<f64>)| Shape::Box { center, half_extents };
        let objects = vec![
            object(
                1,
                "floor",
                Shape::Plane {
                    normal: Vector3::z(),
                    offset: 0.0,
                },
                [0.55, 0.55, 0.55],
                [90, 90, 90],
            ),
            object(2, "table", boxed((table_c, table_h)), [0.6, 0.45, 0.3], [200, 120, 40]),
            object(
                3,
                "pot",
                Shape::Cylinder {
                    base: pot_base,
                    radius: params.pot_radius,
                    height: params.pot_height,
                },
                [0.7, 0.3, 0.2],
                [220, 40, 40],
            ),
            SceneObject {
                id: 4,
                name: "plant".into(),
                shapes: plant,
                albedo: [0.2, 0.6, 0.2],
                seg_color: [40, 220, 60],
            },
            object(5, "stand_left", boxed(left), [0.3, 0.3, 0.35], [40, 80, 220]),
            object(6, "stand_right", boxed(right), [0.3, 0.3, 0.35], [40, 200, 220]),
        ];
        let lights = vec![
            Light {
                position: Point3::new(-0.8, 0.6, 2.6),
                intensity: 2.0,
            },
            Light {
                position: Point3::new(0.8, -0.6, 2.6),
                intensity: 2.0,
            },
            Light {
                position: Point3::new(-params.stand_x, 0.9, 1.6),
                intensity: 0.6,
            },
            Light {
                position: Point3::new(params.stand_x, -0.9, 1.6),
                intensity: 0.6,
            },
        ];
        Self {
            objects,
            lights,
            background: [0, 0, 0],
        }
    }

    pub fn validate(&self) -> Result<(), ScenecamError> {
        let mut ids = std::collections::BTreeSet::new();
        let mut colors = std::collections::BTreeSet::new();
        colors.insert(self.background);
        for o in &self.objects {
            if o.id == BACKGROUND_ID || !ids.insert(o.id) {
                return Err(ScenecamError::InvalidScene(format!(
                    "object id {} is reserved or repeated",
                    o.id
                )));
            }
            if !colors.insert(o.seg_color) {
                return Err(ScenecamError::InvalidScene(format!(
                    "seg color of {:?} is not unique",
                    o.name
                )));
            }
            if o.shapes.is_empty() {
                return Err(ScenecamError::InvalidScene(format!("{:?} has no shapes", o.name)));
            }
            for s in &o.shapes {
                s.validate().map_err(ScenecamError::InvalidScene)?;
            }
        }
        Ok(())
    }

    pub fn object(&self, id: u32) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn object_by_name(&self, name: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.name == name)
    }

    pub fn seg_color(&self, id: u32) -> [u8; 3] {
        self.object(id).map_or(self.background, |o| o.seg_color)
    }

    pub fn seg_palette(&self) -> Vec<[u8; 3]> {
        self.objects.iter().map(|o| o.seg_color).collect()
    }

    /// Nearest hit over all primitives.
    pub fn ray_intersect(&self, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        for o in &self.objects {
            for s in &o.shapes {
                if let Some((t, normal)) = s.intersect(origin, dir) {
                    if best.is_none_or(|b| t < b.t) {
                        best = Some(Hit { t, id: o.id, normal });
                    }
                }
            }
        }
        best
    }

    /// True if anything lies on the open segment from `origin` to `dist` along `dir`.
    pub fn occluded(&self, origin: &Point3<f64>, dir: &Vector3<f64>, dist: f64) -> bool {
        self.objects
            .iter()
            .flat_map(|o| &o.shapes)
            .any(|s| s.intersect(origin, dir).is_some_and(|(t, _)| t < dist))
    }
}

fn object(id: u32, name: &str, shape: Shape, albedo: [f64; 3], seg_color: [u8; 3]) -> SceneObject {
    SceneObject {
        id,
        name: name.into(),
        shapes: vec![shape],
        albedo,
        seg_color,
    }
}
