//! Analytic stand-in scene, pinhole camera and ray-cast capture.
//!
//! Renders RGB (Lambertian, hard shadows), flat-colour segmentation and
//! planar depth with one ray per pixel, and converts depth back to world
//! point clouds.

mod camera;
mod cloud;
mod image;
pub mod io;
mod scene;

use std::path::PathBuf;

pub use camera::{render, render_all, shade, CameraIntrinsics, DepthMode, Frame, RenderMode, Rendered};
pub use cloud::{depth_to_pointcloud, project_point};
pub use image::{DepthImage, RgbImage, SegImage};
pub use io::{read_pfm, read_ply, read_ppm, write_pfm, write_ply, write_ppm};
pub use scene::{Hit, Light, Scene, SceneObject, SceneParams, Shape, BACKGROUND_ID, RAY_EPSILON};

#[derive(Debug, thiserror::Error)]
pub enum ScenecamError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {reason}", path.display())]
    Format { path: PathBuf, reason: String },
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
}
