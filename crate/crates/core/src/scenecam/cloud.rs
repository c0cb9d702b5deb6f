use nalgebra::{Point3, Vector3};

use super::camera::CameraIntrinsics;
use super::image::DepthImage;
use crate::kinematics::Transform;

/// Back-projects planar depth to world points. Each pixel is unprojected
/// through its centre, matching the renderer; non-finite depths are skipped.
pub fn depth_to_pointcloud(depth: &DepthImage, intr: &CameraIntrinsics, cam_pose: &Transform) -> Vec<Vector3<f64>> {
    let mut out = Vec::new();
    for v in 0..depth.height {
        for u in 0..depth.width {
            let z = depth.get(u, v) as f64;
            if !z.is_finite() {
                continue;
            }
            let p_cam = intr.pixel_ray(u, v) * z;
            out.push(cam_pose.transform_point(&p_cam));
        }
    }
    out
}

/// Projects a world point into continuous image coordinates.
pub fn project_point(p: &Vector3<f64>, intr: &CameraIntrinsics, cam_pose: &Transform) -> Option<[f64; 2]> {
    intr.project(&Point3::from(cam_pose.inverse().transform_point(p)))
}
