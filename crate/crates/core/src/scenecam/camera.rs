use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::image::{DepthImage, RgbImage};
use super::scene::{Hit, Scene};
use super::ScenecamError;
use crate::kinematics::Transform;

/// Pinhole intrinsics. The camera looks along its +Z axis with +X to the
/// right of the image and +Y down; pixel (u, v) covers [u, u+1) × [v, v+1)
/// and its ray passes through the pixel centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self::hd1080()
    }
}

impl CameraIntrinsics {
    pub fn hd1080() -> Self {
        Self {
            width: 1920,
            height: 1080,
            fx: 1400.0,
            fy: 1400.0,
            cx: 960.0,
            cy: 540.0,
        }
    }

    /// Same field of view at a different resolution.
    pub fn scaled(&self, width: u32, height: u32) -> Self {
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        Self {
            width,
            height,
            fx: self.fx * sx,
            fy: self.fy * sy,
            cx: self.cx * sx,
            cy: self.cy * sy,
        }
    }

    pub fn validate(&self) -> Result<(), ScenecamError> {
        if self.width == 0 || self.height == 0 {
            return Err(ScenecamError::InvalidIntrinsics("image size must be positive".into()));
        }
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.cx.is_finite() || !self.cy.is_finite() {
            return Err(ScenecamError::InvalidIntrinsics(
                "focal lengths must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Camera-frame direction (z = 1) through the centre of pixel (u, v).
    pub fn pixel_ray(&self, u: u32, v: u32) -> Vector3<f64> {
        Vector3::new(
            (u as f64 + 0.5 - self.cx) / self.fx,
            (v as f64 + 0.5 - self.cy) / self.fy,
            1.0,
        )
    }

    /// Continuous image coordinates of a camera-frame point; pixel centres
    /// sit at half-integers. None behind the camera.
    pub fn project(&self, p: &Point3<f64>) -> Option<[f64; 2]> {
        (p.z > 0.0).then(|| [self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthMode {
    /// Camera-space Z of the hit.
    #[default]
    Planar,
    /// Euclidean distance from the camera centre.
    RayLength,
}

impl DepthMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            DepthMode::Planar => "planar",
            DepthMode::RayLength => "ray_length",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderMode {
    Rgb,
    Seg,
    Depth,
}

/// The three images of one capture.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub rgb: RgbImage,
    pub seg: RgbImage,
    pub depth: DepthImage,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rendered {
    Rgb(RgbImage),
    Seg(RgbImage),
    Depth(DepthImage),
}

struct PixelSample {
    rgb: [u8; 3],
    seg: [u8; 3],
    depth: f32,
}

/// Shades a hit: albedo × Σ max(0, n·l)·I/d² over lights with a clear line of sight.
pub fn shade(scene: &Scene, origin: &Point3<f64>, dir: &Vector3<f64>, hit: &Hit) -> [f64; 3] {
    let obj = scene.object(hit.id).expect("hit id comes from the scene");
    let p = origin + dir * hit.t;
    let mut irradiance = 0.0;
    for light in &scene.lights {
        let to_light = light.position - p;
        let d = to_light.norm();
        let l = to_light / d;
        let cos = hit.normal.dot(&l);
        if cos <= 0.0 || scene.occluded(&p, &l, d) {
            continue;
        }
        irradiance += cos * light.intensity / (d * d);
    }
    obj.albedo.map(|a| a * irradiance)
}

fn to_u8(x: f64) -> u8 {
    (x.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn sample(
    scene: &Scene,
    pose: &Transform,
    intr: &CameraIntrinsics,
    depth_mode: DepthMode,
    u: u32,
    v: u32,
    want_rgb: bool,
) -> PixelSample {
    let ray_cam = intr.pixel_ray(u, v);
    let len = ray_cam.norm();
    let dir = pose.transform_vector(&(ray_cam / len));
    let origin = Point3::from(pose.translation);
    match scene.ray_intersect(&origin, &dir) {
        None => PixelSample {
            rgb: scene.background,
            seg: scene.background,
            depth: f32::INFINITY,
        },
        Some(hit) => {
            let rgb = if want_rgb {
                shade(scene, &origin, &dir, &hit).map(to_u8)
            } else {
                [0; 3]
            };
            let depth = match depth_mode {
                // the camera-frame ray has z = 1, so planar depth is t / |ray|
                DepthMode::Planar => hit.t / len,
                DepthMode::RayLength => hit.t,
            };
            PixelSample {
                rgb,
                seg: scene.seg_color(hit.id),
                depth: depth as f32,
            }
        }
    }
}

fn render_pixels(
    scene: &Scene,
    pose: &Transform,
    intr: &CameraIntrinsics,
    depth_mode: DepthMode,
    want_rgb: bool,
) -> Vec<PixelSample> {
    let w = intr.width;
    (0..intr.height)
        .into_par_iter()
        .flat_map_iter(|v| (0..w).map(move |u| (u, v)))
        .map(|(u, v)| sample(scene, pose, intr, depth_mode, u, v, want_rgb))
        .collect()
}

/// Renders RGB, segmentation and depth in a single pass.
pub fn render_all(scene: &Scene, pose: &Transform, intr: &CameraIntrinsics, depth_mode: DepthMode) -> Frame {
    let px = render_pixels(scene, pose, intr, depth_mode, true);
    let (w, h) = (intr.width, intr.height);
    Frame {
        rgb: RgbImage::from_fn(w, h, |i| px[i].rgb),
        seg: RgbImage::from_fn(w, h, |i| px[i].seg),
        depth: DepthImage::from_vec(w, h, px.iter().map(|p| p.depth).collect()),
    }
}

pub fn render(scene: &Scene, pose: &Transform, intr: &CameraIntrinsics, mode: RenderMode) -> Rendered {
    let px = render_pixels(scene, pose, intr, DepthMode::Planar, mode == RenderMode::Rgb);
    let (w, h) = (intr.width, intr.height);
    match mode {
        RenderMode::Rgb => Rendered::Rgb(RgbImage::from_fn(w, h, |i| px[i].rgb)),
        RenderMode::Seg => Rendered::Seg(RgbImage::from_fn(w, h, |i| px[i].seg)),
        RenderMode::Depth => Rendered::Depth(DepthImage::from_vec(w, h, px.iter().map(|p| p.depth).collect())),
    }
}
