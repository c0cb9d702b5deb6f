use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::kinematics::KinematicChain;

/// Clearance added to every box before testing link segments.
pub const COLLISION_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionBox {
    pub center: [f64; 3],
    pub half_extents: [f64; 3],
}

impl CollisionBox {
    pub fn new(center: Vector3<f64>, half_extents: Vector3<f64>) -> Self {
        assert!(
            half_extents.iter().all(|h| *h > 0.0),
            "box half extents must be positive"
        );
        Self {
            center: center.into(),
            half_extents: half_extents.into(),
        }
    }

    pub fn inflated(&self, margin: f64) -> Self {
        Self {
            center: self.center,
            half_extents: self.half_extents.map(|h| h + margin),
        }
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| (p[i] - self.center[i]).abs() <= self.half_extents[i])
    }

    /// Closed segment `a → b` against the closed box (slab test).
    pub fn intersects_segment(&self, a: &Vector3<f64>, b: &Vector3<f64>) -> bool {
        let d = b - a;
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for i in 0..3 {
            let lo = self.center[i] - self.half_extents[i];
            let hi = self.center[i] + self.half_extents[i];
            if d[i].abs() < 1e-300 {
                if a[i] < lo || a[i] > hi {
                    return false;
                }
                continue;
            }
            let (mut ta, mut tb) = ((lo - a[i]) / d[i], (hi - a[i]) / d[i]);
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return false;
            }
        }
        true
    }
}

/// Link skeleton of `q`: consecutive joint origins followed by the tool point.
pub fn link_segments(chain: &KinematicChain, q: &[f64]) -> Vec<(Vector3<f64>, Vector3<f64>)> {
    let pts = chain.joint_positions(q);
    pts.windows(2).map(|w| (w[0], w[1])).collect()
}

/// True if any link segment enters any box inflated by [`COLLISION_MARGIN`].
pub fn collides(chain: &KinematicChain, q: &[f64], boxes: &[CollisionBox]) -> bool {
    let inflated: Vec<CollisionBox> = boxes.iter().map(|b| b.inflated(COLLISION_MARGIN)).collect();
    link_segments(chain, q)
        .iter()
        .any(|(a, b)| inflated.iter().any(|bx| bx.intersects_segment(a, b)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_cases() {
        let b = CollisionBox::new(Vector3::zeros(), Vector3::new(1.0, 1.0, 1.0));
        assert!(b.intersects_segment(&Vector3::new(-2.0, 0.0, 0.0), &Vector3::new(2.0, 0.0, 0.0)));
        assert!(b.intersects_segment(&Vector3::new(0.5, 0.5, 0.5), &Vector3::new(0.6, 0.5, 0.5)));
        assert!(!b.intersects_segment(&Vector3::new(-2.0, 0.0, 0.0), &Vector3::new(-1.5, 0.0, 0.0)));
        assert!(!b.intersects_segment(&Vector3::new(-2.0, 2.0, 0.0), &Vector3::new(2.0, 2.0, 0.0)));
        // touching a face counts
        assert!(b.intersects_segment(&Vector3::new(1.0, 0.0, 3.0), &Vector3::new(1.0, 0.0, -3.0)));
    }
}
