//! Pairwise rigid registration, topology-consistent sequence conversion, and
//! UV propagation.

use std::path::PathBuf;

use super::align::{grid_search_pose, icp_from, REG_TRUNCATION};
use super::arap::{arap_register, ArapParams};
use super::similarity::Similarity3;
use crate::data::camera::CameraPose6;
use crate::data::silhouette::render_silhouette;
use crate::geom::{chamfer, sample_surface, TriMesh, Vec3};
use crate::{Error, Result};

/// Symmetric point-to-surface distance between a transformed source and a
/// target: no sampling-noise floor, so fine pose errors stay visible.
fn surface_chamfer(
    transform: &Similarity3,
    src_samples: &crate::geom::PointCloud,
    src_grid: &crate::geom::TriGrid,
    dst_samples: &crate::geom::PointCloud,
    dst_grid: &crate::geom::TriGrid,
) -> f64 {
    let fwd: f64 = src_samples
        .positions
        .iter()
        .map(|&p| dst_grid.closest_point(transform.apply(p)).0)
        .sum::<f64>()
        / src_samples.len() as f64;
    let inv = transform.inverse();
    let bwd: f64 = dst_samples
        .positions
        .iter()
        .map(|&p| src_grid.closest_point(inv.apply(p)).0 * transform.scale)
        .sum::<f64>()
        / dst_samples.len() as f64;
    0.5 * (fwd + bwd)
}

/// Point-to-plane ICP with a similarity update: linearizes the residual
/// `n . (s R p + t - q)` in (rotation, log-scale, translation) and solves
/// the 7x7 normal equations each iteration. Converges much faster than
/// point-to-point on smooth surfaces because tangential sliding is free.
/// Returns the best iterate under the symmetric surface distance.
fn icp_point_to_plane(
    src_samples: &crate::geom::PointCloud,
    src_grid: &crate::geom::TriGrid,
    dst_mesh: &TriMesh,
    dst_samples: &crate::geom::PointCloud,
    dst_grid: &crate::geom::TriGrid,
    init: Similarity3,
    iters: usize,
) -> Result<Similarity3> {
    let dst_normals: Vec<Vec3> = (0..dst_mesh.faces.len())
        .map(|f| dst_mesh.face_normal(f))
        .collect();
    let mut current = init;
    let mut best = init;
    let mut best_score = surface_chamfer(&current, src_samples, src_grid, dst_samples, dst_grid);
    for _ in 0..iters {
        let mut ata = nalgebra::SMatrix::<f64, 7, 7>::zeros();
        let mut atb = nalgebra::SVector::<f64, 7>::zeros();
        for &p in &src_samples.positions {
            let v = current.scale * (current.rotation * p);
            let moved = v + current.translation;
            let (_, q, tri) = dst_grid.closest_point(moved);
            let n = dst_normals[tri as usize];
            let residual = n.dot(&(moved - q));
            // Row: [ (v x n) for rotation, n.v for log-scale, n for t ].
            let vxn = v.cross(&n);
            let row = [vxn.x, vxn.y, vxn.z, n.dot(&v), n.x, n.y, n.z];
            for i in 0..7 {
                for j in 0..7 {
                    ata[(i, j)] += row[i] * row[j];
                }
                atb[i] -= row[i] * residual;
            }
        }
        // Tiny Tikhonov term keeps the solve stable on symmetric shapes.
        for i in 0..7 {
            ata[(i, i)] += 1e-12;
        }
        let Some(delta) = ata.lu().solve(&atb) else {
            break;
        };
        let omega = Vec3::new(delta[0], delta[1], delta[2]);
        let rot = nalgebra::Rotation3::from_scaled_axis(omega).into_inner();
        current = Similarity3 {
            rotation: rot * current.rotation,
            scale: current.scale * delta[3].exp(),
            translation: current.translation + Vec3::new(delta[4], delta[5], delta[6]),
        };
        let score = surface_chamfer(&current, src_samples, src_grid, dst_samples, dst_grid);
        if score < best_score {
            best_score = score;
            best = current;
        }
        if omega.norm() < 1e-10 && delta[3].abs() < 1e-12 {
            break;
        }
    }
    Ok(best)
}

/// Four fixed validation views for the silhouette part of pair registration.
fn four_views(mesh: &TriMesh) -> Vec<CameraPose6> {
    let (lo, hi) = mesh.bbox();
    let center = (lo + hi) * 0.5;
    let bound = ((hi - lo).norm() * 0.5).max(1e-3);
    (0..4)
        .map(|i| CameraPose6 {
            yaw: std::f64::consts::FRAC_PI_2 * i as f64,
            pitch: 0.35,
            radius: bound * 2.5,
            lookat: [center.x, center.y, center.z],
        })
        .collect()
}

const PAIR_VIEW_RES: usize = 40;

/// Combined objective: symmetric surface distance plus multi-view
/// silhouette mismatch.
#[allow(clippy::too_many_arguments)]
fn pair_objective(
    transform: &Similarity3,
    src_samples: &crate::geom::PointCloud,
    src_grid: &crate::geom::TriGrid,
    src_mesh: &TriMesh,
    dst_samples: &crate::geom::PointCloud,
    dst_grid: &crate::geom::TriGrid,
    dst_views: &[(CameraPose6, crate::data::SilhouetteImage)],
) -> f64 {
    let c = surface_chamfer(transform, src_samples, src_grid, dst_samples, dst_grid);
    let mut sil = 0.0;
    let moved_mesh = transform.apply_mesh(src_mesh);
    for (pose, reference) in dst_views {
        match render_silhouette(&moved_mesh, pose, PAIR_VIEW_RES) {
            Ok(img) => sil += 1.0 - img.soft_iou(reference),
            Err(_) => sil += 1.0,
        }
    }
    c + 0.05 * sil / dst_views.len() as f64
}

/// Similarity registration of one mesh onto another: azimuth/scale grid
/// search, ICP, then finite-difference refinement of the seven similarity
/// parameters against the Chamfer + 4-view silhouette objective.
pub fn rigid_register_pair(src: &TriMesh, dst: &TriMesh) -> Result<Similarity3> {
    let src_samples = sample_surface(src, 2048, 11)?;
    let dst_samples = sample_surface(dst, 2048, 12)?;
    let src_grid = crate::geom::TriGrid::build(src);
    let dst_grid = crate::geom::TriGrid::build(dst);
    let scale_grid: Vec<f64> = (0..=14).map(|i| 0.7 + 0.05 * i as f64).collect();
    let coarse = grid_search_pose(&src_samples, &dst_samples, 64, &scale_grid, REG_TRUNCATION)?;
    let seeded = icp_from(&src_samples, &dst_samples, coarse, 20, true, 1e-9)?;
    let mut best = icp_point_to_plane(&src_samples, &src_grid, dst, &dst_samples, &dst_grid, seeded, 30)?;
    // Finite-difference refinement over (axis-angle, ln scale, translation).
    let views: Vec<_> = four_views(dst)
        .into_iter()
        .map(|pose| {
            let img = render_silhouette(dst, &pose, PAIR_VIEW_RES).expect("dst view render");
            (pose, img)
        })
        .collect();
    let obj = |t: &Similarity3| {
        pair_objective(t, &src_samples, &src_grid, src, &dst_samples, &dst_grid, &views)
    };
    let mut fx = obj(&best);
    let h = 2e-3;
    let mut step = 1.0;
    for _ in 0..15 {
        let mut grad = [0.0f64; 7];
        for d in 0..7 {
            let plus = perturb(&best, d, h);
            let minus = perturb(&best, d, -h);
            grad[d] = (obj(&plus) - obj(&minus)) / (2.0 * h);
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm < 1e-10 {
            break;
        }
        let mut accepted = false;
        let mut trial_step = step;
        for _ in 0..6 {
            let mut trial = best;
            for (d, &g) in grad.iter().enumerate() {
                trial = perturb(&trial, d, -trial_step * g / norm * h * 4.0);
            }
            let ft = obj(&trial);
            if ft < fx {
                best = trial;
                fx = ft;
                step = (trial_step * 1.5).min(4.0);
                accepted = true;
                break;
            }
            trial_step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(best)
}

/// Applies a small delta to one of the seven similarity parameters.
fn perturb(t: &Similarity3, dim: usize, delta: f64) -> Similarity3 {
    let mut out = *t;
    match dim {
        0..=2 => {
            let mut axis = Vec3::zeros();
            axis[dim] = 1.0;
            let d = Similarity3::from_axis_angle(axis, delta);
            out.rotation = d.rotation * out.rotation;
        }
        3 => out.scale *= delta.exp(),
        _ => out.translation[dim - 4] += delta,
    }
    out
}

#[derive(Debug, Clone)]
pub struct ConsistentSequence {
    pub frames: Vec<TriMesh>,
    /// Residual Chamfer between each output frame and its input frame.
    pub residuals: Vec<f64>,
    /// Pairwise rigid transforms used at each step (frame t-1 -> t).
    pub transforms: Vec<Similarity3>,
}

/// Converts a mesh sequence into one sharing frame-1 topology by chaining
/// rigid + ARAP registration across consecutive frames. The per-frame
/// residual reports how closely each deformed mesh matches its input; a
/// genuine topology change (splitting) shows up as a residual spike.
pub fn topology_consistent_sequence(
    seq: &[TriMesh],
    arap: &ArapParams,
) -> Result<ConsistentSequence> {
    if seq.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let mut frames = vec![seq[0].clone()];
    let mut residuals = vec![0.0];
    let mut transforms = Vec::new();
    for t in 1..seq.len() {
        let prev = frames[t - 1].clone();
        let rigid = rigid_register_pair(&prev, &seq[t])?;
        let moved = rigid.apply_mesh(&prev);
        let deformed = arap_register(&moved, &seq[t], arap)?;
        let mesh = TriMesh {
            vertices: deformed.positions,
            faces: prev.faces.clone(),
            uv: prev.uv.clone(),
        };
        let a = sample_surface(&mesh, 4096, 200 + t as u64)?;
        let b = sample_surface(&seq[t], 4096, 300 + t as u64)?;
        residuals.push(chamfer(&a, &b, None)?);
        transforms.push(rigid);
        frames.push(mesh);
    }
    Ok(ConsistentSequence {
        frames,
        residuals,
        transforms,
    })
}

/// A texture reference shared by a consistent sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct TexturedSequence {
    pub frames: Vec<TriMesh>,
    pub texture: PathBuf,
}

/// Copies frame 1's UVs and texture reference onto every frame of a
/// topology-consistent sequence. Geometry is untouched.
pub fn propagate_uv(
    consistent: &[TriMesh],
    textured_frame1: &TriMesh,
    texture: PathBuf,
) -> Result<TexturedSequence> {
    let uv = textured_frame1
        .uv
        .as_ref()
        .ok_or(Error::TopologyMismatch)?;
    if textured_frame1.vertices.len() != consistent[0].vertices.len()
        || textured_frame1.faces != consistent[0].faces
    {
        return Err(Error::TopologyMismatch);
    }
    for frame in consistent {
        if frame.vertices.len() != textured_frame1.vertices.len()
            || frame.faces != textured_frame1.faces
        {
            return Err(Error::TopologyMismatch);
        }
    }
    let frames = consistent
        .iter()
        .map(|f| {
            let mut out = f.clone();
            out.uv = Some(uv.clone());
            out
        })
        .collect();
    Ok(TexturedSequence {
        frames,
        texture,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::asset::{gen_asset, Warp};
    use crate::data::normalize_sequence;

    fn bent_asset(frames: usize) -> crate::data::asset::AnimatedAsset {
        normalize_sequence(
            &gen_asset(
                Warp::BendCylinder {
                    radius: 0.15,
                    half_height: 0.35,
                    max_bend: 0.7,
                    drift: [0.0; 3],
                },
                frames,
                0,
            )
            .unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn pair_recovers_rigid_motion() {
        let asset = bent_asset(4);
        let src = asset.frame(4).clone();
        let truth = Similarity3::from_axis_angle(Vec3::new(0.0, 1.0, 0.15), 0.4)
            .with_scale(1.1)
            .compose(&Similarity3::from_translation(Vec3::new(0.05, 0.0, -0.04)));
        let dst = truth.apply_mesh(&src);
        let got = rigid_register_pair(&src, &dst).unwrap();
        assert!(
            got.rotation_error(&truth).to_degrees() <= 0.5,
            "rotation error {}",
            got.rotation_error(&truth).to_degrees()
        );
        assert!((got.scale - truth.scale).abs() <= 0.01);
    }

    #[test]
    fn pair_identity() {
        let asset = bent_asset(2);
        let src = asset.frame(2).clone();
        let got = rigid_register_pair(&src, &src).unwrap();
        assert!(got.rotation_angle().to_degrees() < 0.5);
        assert!((got.scale - 1.0).abs() < 0.01);
        assert!(got.translation.norm() < 0.01);
    }

    #[test]
    fn symmetric_object_registers_by_residual() {
        // A sphere: any symmetry-equivalent rotation is acceptable, so the
        // assertion is on the geometric residual, not the parameters.
        let sphere = crate::geom::mesh::icosphere(Vec3::zeros(), 0.3, 2);
        let truth = Similarity3::from_yaw(1.0);
        let dst = truth.apply_mesh(&sphere);
        let got = rigid_register_pair(&sphere, &dst).unwrap();
        let dst_grid = crate::geom::TriGrid::build(&dst);
        let moved = sample_surface(&got.apply_mesh(&sphere), 2048, 1).unwrap();
        let residual = moved
            .positions
            .iter()
            .map(|&p| dst_grid.closest_point(p).0)
            .sum::<f64>()
            / moved.len() as f64;
        assert!(residual <= 1e-3, "residual {residual}");
    }

    #[test]
    fn static_sequence_stays_identical() {
        let asset = bent_asset(2);
        let frame = asset.frame(1).clone();
        let seq = vec![frame.clone(), frame.clone(), frame.clone()];
        let out = topology_consistent_sequence(&seq, &ArapParams::default()).unwrap();
        assert_eq!(out.frames.len(), 3);
        // The reported residual is a sampled Chamfer distance, whose floor
        // is the distance between two independent samplings of one surface.
        let a = sample_surface(&frame, 4096, 77).unwrap();
        let b = sample_surface(&frame, 4096, 78).unwrap();
        let floor = chamfer(&a, &b, None).unwrap();
        for r in &out.residuals {
            assert!(*r < 1.5 * floor + 1e-4, "residual {r} vs floor {floor}");
        }
        for f in &out.frames {
            assert_eq!(f.faces, frame.faces);
        }
    }

    #[test]
    fn uv_propagation_copies_everything() {
        let tri = TriMesh::new(
            vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let textured = tri
            .clone()
            .with_uv(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
            .unwrap();
        let seq = vec![tri.clone(), tri.clone()];
        let out = propagate_uv(&seq, &textured, PathBuf::from("tex.png")).unwrap();
        assert_eq!(out.frames.len(), 2);
        for f in &out.frames {
            assert_eq!(f.uv, textured.uv);
            assert_eq!(f.faces, textured.faces);
        }
        // Mismatched topology rejected.
        let other = TriMesh::new(
            vec![
                Vec3::zeros(),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [1, 3, 2]],
        )
        .unwrap();
        assert!(matches!(
            propagate_uv(&[other], &textured, PathBuf::from("t.png")),
            Err(Error::TopologyMismatch)
        ));
    }
}
