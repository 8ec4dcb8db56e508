//! 256-case marching cubes over cell-centered scalar grids.

use std::collections::HashMap;

use super::mc_tables::{EDGE_CORNERS, TRIANGLE_TABLE};
use super::{TriMesh, Vec3, VoxelGrid};
use crate::Result;

/// Extracts the `iso` level set of a scalar grid with linear interpolation
/// along cube edges. Vertices are welded across cubes so the output is a
/// closed 2-manifold whenever the isosurface stays clear of the grid
/// boundary. An absent isosurface yields an empty mesh.
pub fn marching_cubes(grid: &VoxelGrid, iso: f64) -> Result<TriMesh> {
    let r = grid.resolution;
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();
    // Global edge key -> welded vertex index. An edge is identified by the
    // grid coordinates of its lower corner plus its axis.
    let mut edge_vertex: HashMap<u64, u32> = HashMap::new();

    let value = |x: usize, y: usize, z: usize| grid.values[grid.index(x, y, z)];
    let corner_offset = |c: usize| -> (usize, usize, usize) {
        // Corner numbering from the lookup tables.
        match c {
            0 => (0, 0, 0),
            1 => (1, 0, 0),
            2 => (1, 1, 0),
            3 => (0, 1, 0),
            4 => (0, 0, 1),
            5 => (1, 0, 1),
            6 => (1, 1, 1),
            _ => (0, 1, 1),
        }
    };

    for z in 0..r - 1 {
        for y in 0..r - 1 {
            for x in 0..r - 1 {
                let mut case = 0usize;
                let mut vals = [0.0f64; 8];
                for (c, v) in vals.iter_mut().enumerate() {
                    let (dx, dy, dz) = corner_offset(c);
                    *v = value(x + dx, y + dy, z + dz);
                    if *v < iso {
                        case |= 1 << c;
                    }
                }
                if case == 0 || case == 255 {
                    continue;
                }
                let tri_row = &TRIANGLE_TABLE[case];
                let mut k = 0;
                while k < 16 && tri_row[k] >= 0 {
                    let mut ids = [0u32; 3];
                    for (slot, id) in ids.iter_mut().enumerate() {
                        let edge = tri_row[k + slot] as usize;
                        *id = edge_vertex_index(
                            grid,
                            iso,
                            (x, y, z),
                            edge,
                            &vals,
                            corner_offset,
                            &mut vertices,
                            &mut edge_vertex,
                        );
                    }
                    // The table emits triangles oriented toward the lower
                    // values; flip so normals point outward (toward higher
                    // values, i.e. away from the negative interior).
                    faces.push([ids[0], ids[2], ids[1]]);
                    k += 3;
                }
            }
        }
    }
    TriMesh::new(vertices, faces)
}

#[allow(clippy::too_many_arguments)]
fn edge_vertex_index(
    grid: &VoxelGrid,
    iso: f64,
    cube: (usize, usize, usize),
    edge: usize,
    vals: &[f64; 8],
    corner_offset: impl Fn(usize) -> (usize, usize, usize),
    vertices: &mut Vec<Vec3>,
    edge_vertex: &mut HashMap<u64, u32>,
) -> u32 {
    let [ca, cb] = EDGE_CORNERS[edge];
    let (ax, ay, az) = corner_offset(ca);
    let (bx, by, bz) = corner_offset(cb);
    let a = (cube.0 + ax, cube.1 + ay, cube.2 + az);
    let b = (cube.0 + bx, cube.1 + by, cube.2 + bz);
    // Lower corner + axis uniquely identify the edge across cubes.
    let (lo, axis) = if a.0 != b.0 {
        (if a.0 < b.0 { a } else { b }, 0u64)
    } else if a.1 != b.1 {
        (if a.1 < b.1 { a } else { b }, 1u64)
    } else {
        (if a.2 < b.2 { a } else { b }, 2u64)
    };
    let key = ((lo.0 as u64) << 42) | ((lo.1 as u64) << 22) | ((lo.2 as u64) << 2) | axis;
    if let Some(&idx) = edge_vertex.get(&key) {
        return idx;
    }
    let va = vals[ca];
    let vb = vals[cb];
    let t = if (vb - va).abs() < 1e-300 {
        0.5
    } else {
        ((iso - va) / (vb - va)).clamp(0.0, 1.0)
    };
    let pa = grid.center(a.0, a.1, a.2);
    let pb = grid.center(b.0, b.1, b.2);
    let p = pa + (pb - pa) * t;
    let idx = vertices.len() as u32;
    vertices.push(p);
    edge_vertex.insert(key, idx);
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere_tsdf(res: usize, radius: f64) -> VoxelGrid {
        let mut g = VoxelGrid::unit_box(res);
        let band = 4.0 * g.cell;
        for z in 0..res {
            for y in 0..res {
                for x in 0..res {
                    let p = g.center(x, y, z);
                    let i = g.index(x, y, z);
                    g.values[i] = (p.norm() - radius).clamp(-band, band);
                }
            }
        }
        g
    }

    #[test]
    fn sphere_is_closed_manifold_with_euler_2() {
        let g = sphere_tsdf(64, 0.35);
        let mesh = marching_cubes(&g, 0.0).unwrap();
        assert!(!mesh.is_empty());
        assert!(mesh.is_watertight(), "sphere mesh must be closed");
        assert_eq!(mesh.euler_characteristic(), 2);
        let cell = g.cell;
        for v in &mesh.vertices {
            assert!(
                (v.norm() - 0.35).abs() <= 2.0 * cell,
                "vertex radius {} too far from 0.35",
                v.norm()
            );
        }
    }

    #[test]
    fn all_positive_grid_is_empty() {
        let mut g = VoxelGrid::unit_box(8);
        g.values.iter_mut().for_each(|v| *v = 1.0);
        let mesh = marching_cubes(&g, 0.0).unwrap();
        assert!(mesh.is_empty());
    }

    #[test]
    fn outward_orientation() {
        // Signed volume must be positive for an outward-oriented closed mesh.
        let g = sphere_tsdf(32, 0.3);
        let mesh = marching_cubes(&g, 0.0).unwrap();
        let mut vol = 0.0;
        for f in 0..mesh.faces.len() {
            let [a, b, c] = mesh.triangle(f);
            vol += a.dot(&b.cross(&c)) / 6.0;
        }
        let expect = 4.0 / 3.0 * std::f64::consts::PI * 0.3f64.powi(3);
        assert!(vol > 0.0, "inward-oriented mesh, volume {vol}");
        assert!((vol - expect).abs() / expect < 0.05, "volume {vol} vs {expect}");
    }

    #[test]
    fn manifold_at_many_radii() {
        for (res, radius) in [(24, 0.21), (33, 0.3), (48, 0.17)] {
            let g = sphere_tsdf(res, radius);
            let mesh = marching_cubes(&g, 0.0).unwrap();
            assert!(mesh.is_watertight(), "res {res} radius {radius}");
            assert_eq!(mesh.euler_characteristic(), 2);
        }
    }
}
