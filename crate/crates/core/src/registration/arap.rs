//! As-rigid-as-possible registration toward a target surface.
//!
//! Alternates per-vertex rotation fitting (local step) with a sparse SPD
//! solve (global step) over the ARAP energy plus a soft closest-point
//! attraction to the target samples. With correspondences fixed, both steps
//! are exact minimizers, and refreshing correspondences picks the nearest
//! sample, so the total energy is non-increasing per outer iteration.

use nalgebra::Matrix3;

use crate::geom::trigrid::TriGrid;
use crate::geom::{TriMesh, Vec3};
use crate::sparse::{conjugate_gradient, CsrMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct ArapParams {
    pub w_arap: f64,
    pub w_chamfer: f64,
    pub iterations: usize,
}

impl Default for ArapParams {
    fn default() -> Self {
        ArapParams {
            w_arap: 1.0,
            w_chamfer: 10.0,
            iterations: 12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ArapResult {
    pub positions: Vec<Vec3>,
    /// Total energy after each outer iteration.
    pub energy: Vec<f64>,
}

struct ArapSystem {
    neighbors: Vec<Vec<(u32, f64)>>,
    matrix: CsrMatrix,
}

fn cotangent_weights(mesh: &TriMesh) -> Result<Vec<Vec<(u32, f64)>>> {
    if !mesh.is_edge_manifold() {
        return Err(Error::invalid("arap requires an edge-manifold mesh"));
    }
    let n = mesh.vertices.len();
    let mut weights: Vec<std::collections::BTreeMap<u32, f64>> = vec![Default::default(); n];
    for f in 0..mesh.faces.len() {
        let [a, b, c] = mesh.faces[f];
        let pa = mesh.vertices[a as usize];
        let pb = mesh.vertices[b as usize];
        let pc = mesh.vertices[c as usize];
        // Half-cotangent of the angle opposite each edge.
        let cot = |apex: Vec3, u: Vec3, v: Vec3| -> f64 {
            let e1 = u - apex;
            let e2 = v - apex;
            let cross = e1.cross(&e2).norm().max(1e-12);
            (e1.dot(&e2) / cross).max(0.0)
        };
        let add = |w: &mut Vec<std::collections::BTreeMap<u32, f64>>, i: u32, j: u32, val: f64| {
            *w[i as usize].entry(j).or_insert(0.0) += val;
            *w[j as usize].entry(i).or_insert(0.0) += val;
        };
        add(&mut weights, a, b, 0.5 * cot(pc, pa, pb));
        add(&mut weights, b, c, 0.5 * cot(pa, pb, pc));
        add(&mut weights, c, a, 0.5 * cot(pb, pc, pa));
    }
    Ok(weights
        .into_iter()
        .map(|m| m.into_iter().map(|(j, w)| (j, w.max(1e-8))).collect())
        .collect())
}

fn build_system(mesh: &TriMesh, params: &ArapParams) -> Result<ArapSystem> {
    let neighbors = cotangent_weights(mesh)?;
    let n = mesh.vertices.len();
    // Matrix: 2*w_arap*L + w_chamfer*I, L = D - W.
    let mut rows: Vec<Vec<(u32, f64)>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::with_capacity(neighbors[i].len() + 1);
        let mut diag = params.w_chamfer;
        for &(j, w) in &neighbors[i] {
            diag += 2.0 * params.w_arap * w;
            row.push((j, -2.0 * params.w_arap * w));
        }
        row.push((i as u32, diag));
        rows.push(row);
    }
    Ok(ArapSystem {
        neighbors,
        matrix: CsrMatrix::from_rows(&rows),
    })
}

/// Deforms `src` toward the target surface. `src` must be edge-manifold;
/// the returned positions keep src topology. Attraction targets are exact
/// closest points on the target mesh, so an already-matching source stays
/// put (zero energy).
pub fn arap_register(
    src: &TriMesh,
    target: &TriMesh,
    params: &ArapParams,
) -> Result<ArapResult> {
    if src.is_empty() || target.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let system = build_system(src, params)?;
    let n = src.vertices.len();
    let accel = TriGrid::build(target);
    let rest = &src.vertices;
    let mut current: Vec<Vec3> = rest.clone();
    let mut rotations: Vec<Matrix3<f64>> = vec![Matrix3::identity(); n];
    let mut energy_track = Vec::with_capacity(params.iterations);
    let mut targets: Vec<Vec3> = vec![Vec3::zeros(); n];
    for _ in 0..params.iterations {
        // Correspondences: closest point on the target surface per vertex.
        for (t, p) in targets.iter_mut().zip(&current) {
            *t = accel.closest_point(*p).1;
        }
        // Local step: per-vertex rotations.
        for i in 0..n {
            let mut s = Matrix3::zeros();
            for &(j, w) in &system.neighbors[i] {
                let e = rest[i] - rest[j as usize];
                let e_def = current[i] - current[j as usize];
                s += w * (e * e_def.transpose());
            }
            let svd = nalgebra::SVD::new(s, true, true);
            let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
            let mut d = Vec3::new(1.0, 1.0, 1.0);
            if (vt.transpose() * u.transpose()).determinant() < 0.0 {
                d.z = -1.0;
            }
            rotations[i] = vt.transpose() * Matrix3::from_diagonal(&d) * u.transpose();
        }
        // Global step: one SPD solve per coordinate, warm-started.
        let mut rhs = vec![Vec3::zeros(); n];
        for i in 0..n {
            let mut b = params.w_chamfer * targets[i];
            for &(j, w) in &system.neighbors[i] {
                let e = rest[i] - rest[j as usize];
                b += params.w_arap * w * ((rotations[i] + rotations[j as usize]) * e);
            }
            rhs[i] = b;
        }
        for axis in 0..3 {
            let b: Vec<f64> = rhs.iter().map(|v| v[axis]).collect();
            let mut x: Vec<f64> = current.iter().map(|v| v[axis]).collect();
            conjugate_gradient(&system.matrix, &b, &mut x, 1e-12, 10 * n.max(100));
            for (v, xi) in current.iter_mut().zip(&x) {
                v[axis] = *xi;
            }
        }
        energy_track.push(arap_energy(
            rest,
            &current,
            &rotations,
            &system.neighbors,
            &targets,
            params,
        ));
    }
    Ok(ArapResult {
        positions: current,
        energy: energy_track,
    })
}

fn arap_energy(
    rest: &[Vec3],
    current: &[Vec3],
    rotations: &[Matrix3<f64>],
    neighbors: &[Vec<(u32, f64)>],
    targets: &[Vec3],
    params: &ArapParams,
) -> f64 {
    let mut e = 0.0;
    for i in 0..rest.len() {
        for &(j, w) in &neighbors[i] {
            let d = (current[i] - current[j as usize])
                - rotations[i] * (rest[i] - rest[j as usize]);
            e += params.w_arap * w * d.norm_squared();
        }
        e += params.w_chamfer * (current[i] - targets[i]).norm_squared();
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::asset::{gen_asset, Warp};
    use crate::geom::mesh::cylinder;
    use crate::geom::sample_surface;
    use crate::registration::similarity::Similarity3;

    #[test]
    fn identity_target_means_zero_displacement() {
        let mesh = cylinder(Vec3::zeros(), 0.2, 0.35, 16, 6);
        let out = arap_register(&mesh, &mesh, &ArapParams::default()).unwrap();
        let max_move = mesh
            .vertices
            .iter()
            .zip(&out.positions)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(max_move < 1e-6, "max move {max_move}");
        assert!(*out.energy.last().unwrap() < 1e-9);
    }

    #[test]
    fn rigid_target_recovers_rigid_motion() {
        let mesh = cylinder(Vec3::zeros(), 0.18, 0.3, 16, 6);
        let motion = Similarity3::from_axis_angle(Vec3::new(0.2, 1.0, 0.1), 0.5)
            .compose(&Similarity3::from_translation(Vec3::new(0.08, -0.02, 0.05)));
        let moved = motion.apply_mesh(&mesh);
        let params = ArapParams {
            w_arap: 1.0,
            w_chamfer: 0.05,
            iterations: 40,
        };
        let out = arap_register(&mesh, &moved, &params).unwrap();
        // Per-edge length change <= 1e-3.
        let mut max_stretch = 0.0f64;
        for f in &mesh.faces {
            for k in 0..3 {
                let (a, b) = (f[k] as usize, f[(k + 1) % 3] as usize);
                let before = (mesh.vertices[a] - mesh.vertices[b]).norm();
                let after = (out.positions[a] - out.positions[b]).norm();
                max_stretch = max_stretch.max((before - after).abs());
            }
        }
        assert!(max_stretch <= 1e-3, "edge stretch {max_stretch}");
    }

    #[test]
    fn energy_is_monotone_per_iteration() {
        let warp = Warp::BendCylinder {
            radius: 0.15,
            half_height: 0.35,
            max_bend: 0.9,
            drift: [0.0; 3],
        };
        let asset = gen_asset(warp, 4, 0).unwrap();
        let src = asset.frame(1).clone();
        let out = arap_register(&src, asset.frame(4), &ArapParams::default()).unwrap();
        for w in out.energy.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "energy rose: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn bent_cylinder_converges_to_target() {
        let warp = Warp::BendCylinder {
            radius: 0.14,
            half_height: 0.34,
            max_bend: 0.8,
            drift: [0.0; 3],
        };
        let asset = gen_asset(warp, 4, 0).unwrap();
        let src = asset.frame(1).clone();
        let dst = asset.frame(4);
        let params = ArapParams {
            w_arap: 1.0,
            w_chamfer: 10.0,
            iterations: 25,
        };
        let out = arap_register(&src, dst, &params).unwrap();
        let deformed = TriMesh::new(out.positions, src.faces.clone()).unwrap();
        let deformed_samples = sample_surface(&deformed, 4096, 4).unwrap();
        let dst_samples = sample_surface(dst, 4096, 5).unwrap();
        let c = crate::geom::chamfer(&deformed_samples, &dst_samples, None).unwrap();
        assert!(c <= 0.01, "residual chamfer {c}");
    }

    #[test]
    fn non_manifold_rejected() {
        // Three faces sharing one edge.
        let verts = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, -1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ];
        let faces = vec![[0, 1, 2], [0, 1, 3], [0, 1, 4]];
        let bad = TriMesh::new(verts, faces).unwrap();
        let target = crate::geom::mesh::box_mesh(Vec3::zeros(), Vec3::repeat(0.3));
        assert!(arap_register(&bad, &target, &ArapParams::default()).is_err());
    }
}
