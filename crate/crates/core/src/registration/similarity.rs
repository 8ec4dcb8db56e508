//! Similarity transforms (rotation + uniform scale + translation) and the
//! closed-form Umeyama alignment.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::geom::{PointCloud, Vec3};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity3 {
    pub rotation: Matrix3<f64>,
    pub scale: f64,
    pub translation: Vec3,
}

impl Default for Similarity3 {
    fn default() -> Self {
        Self::identity()
    }
}

impl Similarity3 {
    pub fn identity() -> Self {
        Similarity3 {
            rotation: Matrix3::identity(),
            scale: 1.0,
            translation: Vec3::zeros(),
        }
    }

    /// Rotation about the vertical (y) axis, the azimuth used by pose grid
    /// search.
    pub fn from_yaw(yaw: f64) -> Self {
        let (s, c) = yaw.sin_cos();
        Similarity3 {
            rotation: Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c),
            scale: 1.0,
            translation: Vec3::zeros(),
        }
    }

    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let rotation = nalgebra::Rotation3::from_axis_angle(
            &nalgebra::Unit::new_normalize(axis),
            angle,
        )
        .into_inner();
        Similarity3 {
            rotation,
            scale: 1.0,
            translation: Vec3::zeros(),
        }
    }

    pub fn from_translation(t: Vec3) -> Self {
        Similarity3 {
            rotation: Matrix3::identity(),
            scale: 1.0,
            translation: t,
        }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        self.scale * (self.rotation * p) + self.translation
    }

    pub fn apply_cloud(&self, cloud: &PointCloud) -> PointCloud {
        PointCloud {
            positions: cloud.positions.iter().map(|&p| self.apply(p)).collect(),
            normals: cloud
                .normals
                .as_ref()
                .map(|ns| ns.iter().map(|n| self.rotation * n).collect()),
        }
    }

    pub fn apply_mesh(&self, mesh: &crate::geom::TriMesh) -> crate::geom::TriMesh {
        let mut out = mesh.clone();
        out.map_vertices(|p| self.apply(p));
        out
    }

    /// Composition: apply `other` first, then `self`.
    pub fn compose(&self, other: &Similarity3) -> Similarity3 {
        Similarity3 {
            rotation: self.rotation * other.rotation,
            scale: self.scale * other.scale,
            translation: self.scale * (self.rotation * other.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> Similarity3 {
        let rt = self.rotation.transpose();
        Similarity3 {
            rotation: rt,
            scale: 1.0 / self.scale,
            translation: -(1.0 / self.scale) * (rt * self.translation),
        }
    }

    /// Rotation angle in radians (geodesic distance from identity).
    pub fn rotation_angle(&self) -> f64 {
        ((self.rotation.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
    }

    /// Angle between this rotation and another.
    pub fn rotation_error(&self, other: &Similarity3) -> f64 {
        let rel = self.rotation.transpose() * other.rotation;
        ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
    }
}

/// JSON-friendly form for transforms.json.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimilarityRecord {
    pub rotation: [[f64; 3]; 3],
    pub scale: f64,
    pub translation: [f64; 3],
}

impl From<&Similarity3> for SimilarityRecord {
    fn from(s: &Similarity3) -> Self {
        let m = &s.rotation;
        SimilarityRecord {
            rotation: [
                [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
                [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
                [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
            ],
            scale: s.scale,
            translation: [s.translation.x, s.translation.y, s.translation.z],
        }
    }
}

/// Closed-form least-squares similarity (Umeyama) from paired points.
pub fn umeyama(src: &[Vec3], dst: &[Vec3], with_scale: bool) -> Result<Similarity3> {
    if src.len() != dst.len() || src.len() < 3 {
        return Err(Error::Degenerate);
    }
    let n = src.len() as f64;
    let mu_s: Vec3 = src.iter().sum::<Vec3>() / n;
    let mu_d: Vec3 = dst.iter().sum::<Vec3>() / n;
    let mut cov = Matrix3::zeros();
    let mut var_s = 0.0;
    for (s, d) in src.iter().zip(dst) {
        let cs = s - mu_s;
        let cd = d - mu_d;
        cov += cd * cs.transpose();
        var_s += cs.norm_squared();
    }
    cov /= n;
    var_s /= n;
    let svd = nalgebra::SVD::new(cov, true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let sv = svd.singular_values;
    if sv[2] < 1e-12 * sv[0].max(1e-300) || var_s < 1e-24 {
        return Err(Error::Degenerate);
    }
    let mut s_diag = Vec3::new(1.0, 1.0, 1.0);
    if (u * vt).determinant() < 0.0 {
        s_diag.z = -1.0;
    }
    let rotation = u * Matrix3::from_diagonal(&s_diag) * vt;
    let scale = if with_scale {
        (sv[0] * s_diag.x + sv[1] * s_diag.y + sv[2] * s_diag.z) / var_s
    } else {
        1.0
    };
    let translation = mu_d - scale * (rotation * mu_s);
    Ok(Similarity3 {
        rotation,
        scale,
        translation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_cloud(n: usize, seed: u64) -> Vec<Vec3> {
        let mut r = crate::rng::rng(seed);
        (0..n)
            .map(|_| Vec3::new(r.gen_range(-0.5..0.5), r.gen_range(-0.5..0.5), r.gen_range(-0.5..0.5)))
            .collect()
    }

    #[test]
    fn umeyama_recovers_exact_similarity() {
        let src = random_cloud(40, 1);
        let truth = Similarity3::from_axis_angle(Vec3::new(0.3, 1.0, -0.2), 0.7)
            .with_scale(1.23)
            .compose(&Similarity3::from_translation(Vec3::new(0.1, -0.05, 0.2)));
        let dst: Vec<Vec3> = src.iter().map(|&p| truth.apply(p)).collect();
        let got = umeyama(&src, &dst, true).unwrap();
        assert!(got.rotation_error(&truth) < 1e-10);
        assert!((got.scale - truth.scale).abs() < 1e-10);
        for (s, d) in src.iter().zip(&dst) {
            assert!((got.apply(*s) - d).norm() < 1e-10);
        }
    }

    #[test]
    fn compose_and_inverse_round_trip() {
        let a = Similarity3::from_axis_angle(Vec3::new(1.0, 0.2, 0.0), 0.4).with_scale(0.8);
        let b = Similarity3::from_yaw(1.1)
            .with_scale(1.5)
            .compose(&Similarity3::from_translation(Vec3::new(0.0, 0.3, -0.1)));
        let ab = a.compose(&b);
        let p = Vec3::new(0.2, -0.1, 0.4);
        assert!((ab.apply(p) - a.apply(b.apply(p))).norm() < 1e-12);
        let inv = ab.inverse();
        assert!((inv.apply(ab.apply(p)) - p).norm() < 1e-12);
        assert!((ab.rotation.determinant() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_cases_rejected() {
        let line: Vec<Vec3> = (0..5).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        assert!(umeyama(&line, &line, true).is_err());
        let two = random_cloud(2, 3);
        assert!(umeyama(&two, &two, true).is_err());
    }
}
