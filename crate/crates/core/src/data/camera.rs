use serde::{Deserialize, Serialize};

use crate::geom::Vec3;
use crate::{Error, Result};

/// Six-parameter camera: yaw/pitch/radius orbit around a look-at point,
/// y-up, fixed vertical field of view.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose6 {
    pub yaw: f64,
    pub pitch: f64,
    pub radius: f64,
    pub lookat: [f64; 3],
}

/// Vertical field of view shared by every silhouette render.
pub const FOV_Y: f64 = std::f64::consts::FRAC_PI_4;

impl CameraPose6 {
    pub fn new(yaw: f64, pitch: f64, radius: f64, lookat: Vec3) -> Result<Self> {
        if radius <= 0.0 {
            return Err(Error::invalid("camera radius must be positive"));
        }
        if pitch.abs() >= std::f64::consts::FRAC_PI_2 {
            return Err(Error::invalid("camera pitch must lie in (-pi/2, pi/2)"));
        }
        Ok(CameraPose6 {
            yaw,
            pitch,
            radius,
            lookat: [lookat.x, lookat.y, lookat.z],
        })
    }

    pub fn lookat_vec(&self) -> Vec3 {
        Vec3::new(self.lookat[0], self.lookat[1], self.lookat[2])
    }

    /// Camera center in world space.
    pub fn eye(&self) -> Vec3 {
        let dir = Vec3::new(
            self.pitch.cos() * self.yaw.sin(),
            self.pitch.sin(),
            self.pitch.cos() * self.yaw.cos(),
        );
        self.lookat_vec() + dir * self.radius
    }

    /// Orthonormal camera frame: (right, up, forward).
    pub fn frame(&self) -> (Vec3, Vec3, Vec3) {
        let eye = self.eye();
        let forward = (self.lookat_vec() - eye).normalize();
        let world_up = Vec3::new(0.0, 1.0, 0.0);
        let right = forward.cross(&world_up).normalize();
        let up = right.cross(&forward);
        (right, up, forward)
    }

    /// Projects a world point to pixel coordinates on an RxR image, plus its
    /// camera-space depth.
    pub fn project(&self, p: Vec3, resolution: usize) -> ([f64; 2], f64) {
        let eye = self.eye();
        let (right, up, forward) = self.frame();
        let d = p - eye;
        let depth = d.dot(&forward);
        let tan = (FOV_Y / 2.0).tan();
        let x_ndc = d.dot(&right) / (depth * tan);
        let y_ndc = d.dot(&up) / (depth * tan);
        let r = resolution as f64;
        ([(x_ndc + 1.0) * 0.5 * r, (1.0 - y_ndc) * 0.5 * r], depth)
    }

    /// Camera radius that makes a bounding sphere of radius `bound` span
    /// `fraction` of the image height.
    pub fn framing_radius(bound: f64, fraction: f64) -> f64 {
        let tan_half = (FOV_Y / 2.0).tan() * fraction;
        let alpha = tan_half.atan();
        bound / alpha.sin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eye_orbits_lookat() {
        let c = CameraPose6::new(0.3, 0.2, 2.0, Vec3::new(0.1, 0.0, -0.2)).unwrap();
        assert!(((c.eye() - c.lookat_vec()).norm() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_poses_rejected() {
        assert!(CameraPose6::new(0.0, 0.0, 0.0, Vec3::zeros()).is_err());
        assert!(CameraPose6::new(0.0, 1.6, 1.0, Vec3::zeros()).is_err());
    }

    #[test]
    fn lookat_projects_to_center() {
        let c = CameraPose6::new(1.1, -0.4, 3.0, Vec3::new(0.2, 0.1, 0.0)).unwrap();
        let ([px, py], depth) = c.project(c.lookat_vec(), 100);
        assert!((px - 50.0).abs() < 1e-9 && (py - 50.0).abs() < 1e-9);
        assert!((depth - 3.0).abs() < 1e-12);
    }

    #[test]
    fn framing_radius_spans_fraction() {
        let r = CameraPose6::framing_radius(0.5, 0.6);
        let c = CameraPose6::new(0.0, 0.0, r, Vec3::zeros()).unwrap();
        // The sphere's silhouette half-height in NDC should equal 0.6.
        let alpha = (0.5 / r).asin();
        let ndc = alpha.tan() / (FOV_Y / 2.0).tan();
        assert!((ndc - 0.6).abs() < 1e-12, "ndc {ndc}");
        let _ = c;
    }
}
