//! Surface and sharp-edge point sampling.

use rand::Rng as _;

use super::{PointCloud, TriMesh, Vec3};
use crate::rng;
use crate::{Error, Result};

/// A surface point remembered by the face it came from and its barycentric
/// weights, so it can be re-evaluated after the surface deforms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceAttachment {
    pub face: u32,
    pub weights: [f64; 3],
}

/// Area-weighted surface samples with face normals. Deterministic given seed.
pub fn sample_surface(mesh: &TriMesh, n: usize, seed: u64) -> Result<PointCloud> {
    Ok(sample_surface_attached(mesh, n, seed)?.0)
}

/// Like [`sample_surface`] but also returns per-point attachments.
pub fn sample_surface_attached(
    mesh: &TriMesh,
    n: usize,
    seed: u64,
) -> Result<(PointCloud, Vec<SurfaceAttachment>)> {
    if mesh.is_empty() {
        return Err(Error::EmptyMesh);
    }
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let mut cum = Vec::with_capacity(mesh.faces.len());
    let mut total = 0.0;
    for f in 0..mesh.faces.len() {
        total += mesh.face_area(f);
        cum.push(total);
    }
    if total <= 0.0 {
        return Err(Error::EmptyMesh);
    }
    let mut r = rng::rng(seed);
    let mut positions = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    let mut attachments = Vec::with_capacity(n);
    for _ in 0..n {
        let t = r.gen::<f64>() * total;
        let f = cum.partition_point(|&c| c < t).min(mesh.faces.len() - 1);
        // Uniform barycentric sample via the square-root trick.
        let su = r.gen::<f64>().sqrt();
        let v = r.gen::<f64>();
        let w = [1.0 - su, su * (1.0 - v), su * v];
        positions.push(mesh.bary_point(f, w));
        normals.push(mesh.face_normal(f));
        attachments.push(SurfaceAttachment {
            face: f as u32,
            weights: w,
        });
    }
    Ok((
        PointCloud {
            positions,
            normals: Some(normals),
        },
        attachments,
    ))
}

/// Points sampled uniformly along edges whose dihedral angle (angle between
/// adjacent face normals) exceeds `dihedral_threshold`. Returns an empty
/// cloud when no edge qualifies.
pub fn salient_edge_sample(
    mesh: &TriMesh,
    n: usize,
    dihedral_threshold: f64,
    seed: u64,
) -> Result<PointCloud> {
    if !(0.0 < dihedral_threshold && dihedral_threshold < std::f64::consts::PI) {
        return Err(Error::invalid("dihedral threshold must lie in (0, pi)"));
    }
    let mut sharp: Vec<((u32, u32), Vec3)> = Vec::new();
    let mut edge_faces: Vec<((u32, u32), Vec<u32>)> = mesh.edge_faces().into_iter().collect();
    edge_faces.sort_unstable_by_key(|(e, _)| *e);
    for (edge, faces) in edge_faces {
        if faces.len() != 2 {
            continue;
        }
        let n0 = mesh.face_normal(faces[0] as usize);
        let n1 = mesh.face_normal(faces[1] as usize);
        let angle = n0.dot(&n1).clamp(-1.0, 1.0).acos();
        if angle > dihedral_threshold {
            let normal = (n0 + n1).try_normalize(1e-12).unwrap_or(n0);
            sharp.push((edge, normal));
        }
    }
    if sharp.is_empty() || n == 0 {
        return Ok(PointCloud {
            positions: Vec::new(),
            normals: Some(Vec::new()),
        });
    }
    let mut cum = Vec::with_capacity(sharp.len());
    let mut total = 0.0;
    for ((a, b), _) in &sharp {
        total += (mesh.vertices[*b as usize] - mesh.vertices[*a as usize]).norm();
        cum.push(total);
    }
    let mut r = rng::stream(seed, 1);
    let mut positions = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for _ in 0..n {
        let t = r.gen::<f64>() * total;
        let e = cum.partition_point(|&c| c < t).min(sharp.len() - 1);
        let ((a, b), normal) = sharp[e];
        let u = r.gen::<f64>();
        let p = mesh.vertices[a as usize] * (1.0 - u) + mesh.vertices[b as usize] * u;
        positions.push(p);
        normals.push(normal);
    }
    Ok(PointCloud {
        positions,
        normals: Some(normals),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::mesh::{box_mesh, icosphere};

    #[test]
    fn cube_samples_stay_on_surface() {
        let cube = box_mesh(Vec3::zeros(), Vec3::repeat(0.5));
        let cloud = sample_surface(&cube, 32768, 9).unwrap();
        assert_eq!(cloud.len(), 32768);
        for p in &cloud.positions {
            let m = p.x.abs().max(p.y.abs()).max(p.z.abs());
            assert!((m - 0.5).abs() < 1e-12, "point {p} off the cube surface");
            assert!(p.x.abs() <= 0.5 + 1e-12 && p.y.abs() <= 0.5 + 1e-12 && p.z.abs() <= 0.5 + 1e-12);
        }
    }

    #[test]
    fn single_triangle_barycentric() {
        let m = TriMesh::new(
            vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let (cloud, att) = sample_surface_attached(&m, 1, 12345).unwrap();
        assert_eq!(cloud.len(), 1);
        let w = att[0].weights;
        assert!(w.iter().all(|&x| x >= 0.0));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let p = cloud.positions[0];
        assert!(p.x >= 0.0 && p.y >= 0.0 && p.x + p.y <= 1.0 + 1e-12);
    }

    #[test]
    fn hemisphere_fraction_matches_area_ratio() {
        // Oracle: by symmetry, half the sphere's area has z > 0.
        let sphere = icosphere(Vec3::zeros(), 0.5, 4);
        let cloud = sample_surface(&sphere, 100_000, 4).unwrap();
        let frac = cloud.positions.iter().filter(|p| p.z > 0.0).count() as f64 / 1e5;
        assert!((frac - 0.5).abs() < 0.01, "frac {frac}");
    }

    #[test]
    fn empty_mesh_errors() {
        let m = TriMesh::new(vec![], vec![]).unwrap();
        assert!(matches!(sample_surface(&m, 1, 0), Err(Error::EmptyMesh)));
    }

    #[test]
    fn deterministic_given_seed() {
        let cube = box_mesh(Vec3::zeros(), Vec3::repeat(0.5));
        let a = sample_surface(&cube, 100, 7).unwrap();
        let b = sample_surface(&cube, 100, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cube_edges_are_salient() {
        let cube = box_mesh(Vec3::zeros(), Vec3::repeat(0.5));
        let cloud = salient_edge_sample(&cube, 120, std::f64::consts::FRAC_PI_4, 3).unwrap();
        assert_eq!(cloud.len(), 120);
        for p in &cloud.positions {
            // On a cube edge, two of the three coordinates sit at +-0.5.
            let at_face = [p.x, p.y, p.z]
                .iter()
                .filter(|c| (c.abs() - 0.5).abs() < 1e-9)
                .count();
            assert!(at_face >= 2, "point {p} not on a cube edge");
        }
    }

    #[test]
    fn smooth_sphere_has_no_salient_edges() {
        let sphere = icosphere(Vec3::zeros(), 0.5, 4);
        let cloud = salient_edge_sample(&sphere, 100, std::f64::consts::FRAC_PI_4, 3).unwrap();
        assert!(cloud.is_empty());
    }

    #[test]
    fn single_triangle_has_no_interior_edges() {
        let m = TriMesh::new(
            vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let cloud = salient_edge_sample(&m, 10, 0.1, 0).unwrap();
        assert!(cloud.is_empty());
    }
}
