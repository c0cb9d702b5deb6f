use std::f64::consts::TAU;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::kinematics::Transform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pattern {
    Spherical,
    Cylindrical,
}

impl Pattern {
    pub fn as_str(&self) -> &'static str {
        match self {
            Pattern::Spherical => "spherical",
            Pattern::Cylindrical => "cylindrical",
        }
    }
}

/// Target camera/tool pose. The tool +Z axis is the viewing direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setpoint {
    pub id: usize,
    pub pose: Transform,
    pub pattern: Pattern,
}

impl Setpoint {
    pub fn position(&self) -> Vector3<f64> {
        self.pose.translation
    }
}

fn spaced(range: [f64; 2], n: usize, closed: bool) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 if closed => vec![range[0]],
        1 => vec![0.5 * (range[0] + range[1])],
        _ => {
            // a closed range (full circle) must not repeat its first point
            let div = if closed { n } else { n - 1 } as f64;
            (0..n)
                .map(|i| range[0] + (range[1] - range[0]) * i as f64 / div)
                .collect()
        }
    }
}

fn full_circle(range: [f64; 2]) -> bool {
    ((range[1] - range[0]).abs() - TAU).abs() < 1e-12
}

/// Camera pose at `eye` looking at `target`, with world +Z as up.
pub fn look_at(eye: Vector3<f64>, target: Vector3<f64>) -> Transform {
    Transform::look_at(eye, target, Vector3::z())
}

/// `n_rings × n_per_ring` points on a sphere, all looking at its centre.
/// Latitudes are evenly spaced over `lat_range`; longitudes cover the full
/// circle starting at +X.
pub fn spherical_setpoints(
    center: Vector3<f64>,
    radius: f64,
    n_rings: usize,
    n_per_ring: usize,
    lat_range: [f64; 2],
) -> Vec<Setpoint> {
    spherical_arc(center, radius, n_rings, n_per_ring, lat_range, [0.0, TAU])
}

/// As [`spherical_setpoints`] restricted to a longitude arc. Points are
/// ordered ring by ring with alternating direction so consecutive setpoints
/// stay adjacent.
pub fn spherical_arc(
    center: Vector3<f64>,
    radius: f64,
    n_rings: usize,
    n_per_ring: usize,
    lat_range: [f64; 2],
    lon_range: [f64; 2],
) -> Vec<Setpoint> {
    let lons = spaced(lon_range, n_per_ring, full_circle(lon_range));
    let mut out = Vec::with_capacity(n_rings * n_per_ring);
    for (ring, lat) in spaced(lat_range, n_rings, false).into_iter().enumerate() {
        for j in 0..lons.len() {
            let lon = lons[if ring % 2 == 0 { j } else { lons.len() - 1 - j }];
            let dir = Vector3::new(lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin());
            let eye = center + dir * radius;
            out.push(Setpoint {
                id: out.len(),
                pose: look_at(eye, center),
                pattern: Pattern::Spherical,
            });
        }
    }
    out
}

/// Points on a vertical cylinder through `axis_point`, one ring per height
/// offset (relative to `axis_point.z`), each looking horizontally at the axis.
pub fn cylindrical_setpoints(
    axis_point: Vector3<f64>,
    radius: f64,
    heights: &[f64],
    n_per_ring: usize,
) -> Vec<Setpoint> {
    cylindrical_arc(axis_point, radius, heights, n_per_ring, [0.0, TAU])
}

pub fn cylindrical_arc(
    axis_point: Vector3<f64>,
    radius: f64,
    heights: &[f64],
    n_per_ring: usize,
    lon_range: [f64; 2],
) -> Vec<Setpoint> {
    let lons = spaced(lon_range, n_per_ring, full_circle(lon_range));
    let mut out = Vec::with_capacity(heights.len() * n_per_ring);
    for (ring, h) in heights.iter().enumerate() {
        let on_axis = Vector3::new(axis_point.x, axis_point.y, axis_point.z + h);
        for j in 0..lons.len() {
            let lon = lons[if ring % 2 == 0 { j } else { lons.len() - 1 - j }];
            let eye = on_axis + Vector3::new(lon.cos(), lon.sin(), 0.0) * radius;
            out.push(Setpoint {
                id: out.len(),
                pose: look_at(eye, on_axis),
                pattern: Pattern::Cylindrical,
            });
        }
    }
    out
}
