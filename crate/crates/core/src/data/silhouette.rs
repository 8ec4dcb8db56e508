//! Software silhouette rasterization with 4x supersampling.

use super::camera::CameraPose6;
use crate::geom::{TriMesh, Vec3};
use crate::{Error, Result};

/// Per-pixel coverage in [0, 1] from one camera; the conditioning signal and
/// the registration mask.
#[derive(Debug, Clone, PartialEq)]
pub struct SilhouetteImage {
    pub resolution: usize,
    pub values: Vec<f64>,
    pub camera: CameraPose6,
}

impl SilhouetteImage {
    pub fn coverage_area(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Soft intersection-over-union against another coverage image.
    pub fn soft_iou(&self, other: &SilhouetteImage) -> f64 {
        assert_eq!(self.resolution, other.resolution);
        let mut inter = 0.0;
        let mut union = 0.0;
        for (&a, &b) in self.values.iter().zip(&other.values) {
            inter += a.min(b);
            union += a.max(b);
        }
        if union == 0.0 {
            1.0
        } else {
            inter / union
        }
    }
}

/// Rasterizes the mesh's perspective silhouette. Coverage per pixel is the
/// hit fraction of a 2x2 subsample grid, so it doubles as a soft mask.
/// Invariant to face ordering (coverage is a union).
pub fn render_silhouette(
    mesh: &TriMesh,
    camera: &CameraPose6,
    resolution: usize,
) -> Result<SilhouetteImage> {
    if resolution == 0 {
        return Err(Error::invalid("resolution must be positive"));
    }
    if !mesh.vertices.is_empty() {
        let (lo, hi) = mesh.bbox();
        let center = (lo + hi) * 0.5;
        let bound = (hi - lo).norm() * 0.5;
        if (camera.eye() - center).norm() <= bound {
            return Err(Error::invalid("camera inside bounding sphere"));
        }
    }
    let ss = resolution * 2;
    let mut hits = vec![false; ss * ss];
    for f in 0..mesh.faces.len() {
        let tri = mesh.triangle(f);
        rasterize_triangle(&tri, camera, resolution, &mut hits);
    }
    let mut values = vec![0.0f64; resolution * resolution];
    for py in 0..resolution {
        for px in 0..resolution {
            let mut count = 0;
            for sy in 0..2 {
                for sx in 0..2 {
                    if hits[(py * 2 + sy) * ss + px * 2 + sx] {
                        count += 1;
                    }
                }
            }
            values[py * resolution + px] = count as f64 / 4.0;
        }
    }
    Ok(SilhouetteImage {
        resolution,
        values,
        camera: *camera,
    })
}

fn rasterize_triangle(tri: &[Vec3; 3], camera: &CameraPose6, resolution: usize, hits: &mut [bool]) {
    let ss = resolution * 2;
    let mut pts = [[0.0f64; 2]; 3];
    for (i, v) in tri.iter().enumerate() {
        let (p, depth) = camera.project(*v, resolution);
        if depth <= 1e-9 {
            return;
        }
        // Subsample coordinates.
        pts[i] = [p[0] * 2.0, p[1] * 2.0];
    }
    let area = edge(&pts[0], &pts[1], &pts[2]);
    if area == 0.0 {
        return;
    }
    let min_x = pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
    let max_x = pts.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
    let min_y = pts.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
    let max_y = pts.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
    let x0 = (min_x - 0.5).floor().max(0.0) as usize;
    let x1 = ((max_x + 0.5).ceil() as isize).clamp(0, ss as isize - 1) as usize;
    let y0 = (min_y - 0.5).floor().max(0.0) as usize;
    let y1 = ((max_y + 0.5).ceil() as isize).clamp(0, ss as isize - 1) as usize;
    if x0 > x1 || y0 > y1 {
        return;
    }
    let sign = area.signum();
    for y in y0..=y1 {
        for x in x0..=x1 {
            let s = [x as f64 + 0.5, y as f64 + 0.5];
            let w0 = edge(&pts[1], &pts[2], &s) * sign;
            let w1 = edge(&pts[2], &pts[0], &s) * sign;
            let w2 = edge(&pts[0], &pts[1], &s) * sign;
            if w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0 {
                hits[y * ss + x] = true;
            }
        }
    }
}

#[inline]
fn edge(a: &[f64; 2], b: &[f64; 2], p: &[f64; 2]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::camera::FOV_Y;
    use crate::geom::mesh::icosphere;

    #[test]
    fn sphere_silhouette_is_disc_with_analytic_area() {
        let sphere = icosphere(Vec3::zeros(), 0.4, 3);
        let camera = CameraPose6::new(0.7, 0.3, 2.0, Vec3::zeros()).unwrap();
        let img = render_silhouette(&sphere, &camera, 96).unwrap();
        // Analytic: angular radius asin(r/d); projected disc radius in NDC
        // tan(alpha)/tan(fov/2); area fraction pi * (r_ndc/2)^2.
        let alpha = (0.4f64 / 2.0).asin();
        let r_ndc = alpha.tan() / (FOV_Y / 2.0).tan();
        let expect = std::f64::consts::PI * (r_ndc / 2.0) * (r_ndc / 2.0);
        let got = img.coverage_area();
        assert!(
            (got - expect).abs() / expect < 0.02,
            "area {got} vs analytic {expect}"
        );
    }

    #[test]
    fn empty_mesh_renders_black() {
        let empty = TriMesh::new(vec![], vec![]).unwrap();
        let camera = CameraPose6::new(0.0, 0.0, 2.0, Vec3::zeros()).unwrap();
        let img = render_silhouette(&empty, &camera, 32).unwrap();
        assert!(img.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn yaw_periodicity() {
        let sphere = icosphere(Vec3::new(0.1, 0.0, 0.0), 0.3, 2);
        let a = CameraPose6::new(0.9, 0.2, 2.0, Vec3::zeros()).unwrap();
        let b = CameraPose6::new(0.9 + 2.0 * std::f64::consts::PI, 0.2, 2.0, Vec3::zeros()).unwrap();
        let ia = render_silhouette(&sphere, &a, 64).unwrap();
        let ib = render_silhouette(&sphere, &b, 64).unwrap();
        assert_eq!(ia.values, ib.values);
    }

    #[test]
    fn face_order_invariance() {
        let sphere = icosphere(Vec3::zeros(), 0.35, 2);
        let mut shuffled = sphere.clone();
        shuffled.faces.reverse();
        let camera = CameraPose6::new(0.4, -0.2, 2.2, Vec3::zeros()).unwrap();
        let a = render_silhouette(&sphere, &camera, 64).unwrap();
        let b = render_silhouette(&shuffled, &camera, 64).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn camera_inside_sphere_rejected() {
        let sphere = icosphere(Vec3::zeros(), 0.4, 2);
        let camera = CameraPose6::new(0.0, 0.0, 0.1, Vec3::zeros()).unwrap();
        assert!(render_silhouette(&sphere, &camera, 32).is_err());
    }
}
