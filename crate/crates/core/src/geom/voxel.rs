//! Voxel grids: occupancy rasterization, IoU, and watertight reconstruction
//! via exterior flood fill.

use rand::Rng as _;

use super::trigrid::TriGrid;
use super::{marching_cubes, TriMesh, Vec3};
use crate::par;
use crate::{Error, Result};

/// Cell-centered scalar grid over a cubic volume. Values are either
/// occupancy in {0,1} or truncated signed distances.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub resolution: usize,
    pub origin: Vec3,
    pub cell: f64,
    pub values: Vec<f64>,
}

/// TSDF truncation band in cell units; marching cubes only needs a linear
/// band around the crossing.
pub const TSDF_BAND_CELLS: f64 = 4.0;

impl VoxelGrid {
    /// Empty grid spanning the unit bounding box `[-0.5, 0.5]^3`.
    pub fn unit_box(resolution: usize) -> Self {
        assert!(resolution >= 2);
        VoxelGrid {
            resolution,
            origin: Vec3::repeat(-0.5),
            cell: 1.0 / resolution as f64,
            values: vec![0.0; resolution * resolution * resolution],
        }
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.resolution + y) * self.resolution + x
    }

    #[inline]
    pub fn center(&self, x: usize, y: usize, z: usize) -> Vec3 {
        self.origin
            + Vec3::new(
                (x as f64 + 0.5) * self.cell,
                (y as f64 + 0.5) * self.cell,
                (z as f64 + 0.5) * self.cell,
            )
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn occupied_count(&self) -> usize {
        self.values.iter().filter(|&&v| v > 0.5).count()
    }

    pub fn occupied_fraction(&self) -> f64 {
        self.occupied_count() as f64 / self.len() as f64
    }

    pub fn is_occupancy(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Truncated signed distance grid derived from this occupancy grid using
    /// a 3-4-5 chamfer distance transform. Negative inside; the zero crossing
    /// sits midway between adjacent occupied/empty cell centers.
    pub fn occupancy_to_tsdf(&self) -> VoxelGrid {
        let occupied: Vec<bool> = self.values.iter().map(|&v| v > 0.5).collect();
        let empty: Vec<bool> = occupied.iter().map(|&o| !o).collect();
        let d_to_occ = chamfer_transform(self.resolution, &occupied);
        let d_to_empty = chamfer_transform(self.resolution, &empty);
        let band = TSDF_BAND_CELLS * self.cell;
        let values = (0..self.len())
            .map(|i| {
                let v = if occupied[i] {
                    -(d_to_empty[i] - 0.5) * self.cell
                } else {
                    (d_to_occ[i] - 0.5) * self.cell
                };
                v.clamp(-band, band)
            })
            .collect();
        VoxelGrid {
            resolution: self.resolution,
            origin: self.origin,
            cell: self.cell,
            values,
        }
    }
}

/// Occupancy rasterization of a watertight mesh over the unit bounding box.
/// A cell is occupied iff its center is inside the mesh, decided by parity
/// ray casting along one fixed pseudo-random direction per grid.
pub fn voxelize_occupancy(mesh: &TriMesh, resolution: usize) -> Result<VoxelGrid> {
    if mesh.is_empty() {
        return Err(Error::EmptyMesh);
    }
    if !mesh.is_watertight() {
        return Err(Error::NotWatertight);
    }
    let mut grid = VoxelGrid::unit_box(resolution);
    let accel = TriGrid::build(mesh);
    let dir = grid_ray_direction(resolution);
    let r = resolution;
    let centers_inside = par::map_indexed(r * r * r, |i| {
        let x = i % r;
        let y = (i / r) % r;
        let z = i / (r * r);
        accel.contains(grid.center(x, y, z), dir)
    });
    for (i, inside) in centers_inside.into_iter().enumerate() {
        grid.values[i] = if inside { 1.0 } else { 0.0 };
    }
    Ok(grid)
}

/// Fixed jittered ray direction, derived from the resolution so re-running a
/// grid is reproducible while avoiding axis-aligned degeneracies.
fn grid_ray_direction(resolution: usize) -> Vec3 {
    let mut r = crate::rng::stream(0x564f5847, resolution as u64);
    Vec3::new(r.gen_range(0.01..0.04), r.gen_range(0.01..0.04), 1.0).normalize()
}

/// Intersection-over-union of two occupancy grids. Both grids empty -> 1.
pub fn grid_iou(a: &VoxelGrid, b: &VoxelGrid) -> Result<f64> {
    if a.resolution != b.resolution {
        return Err(Error::invalid(format!(
            "grid resolution mismatch: {} vs {}",
            a.resolution, b.resolution
        )));
    }
    if (a.cell - b.cell).abs() > 1e-12 || (a.origin - b.origin).norm() > 1e-12 {
        return Err(Error::invalid("grid extent mismatch"));
    }
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&va, &vb) in a.values.iter().zip(&b.values) {
        let oa = va > 0.5;
        let ob = vb > 0.5;
        inter += (oa && ob) as usize;
        union += (oa || ob) as usize;
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

/// Watertight reconstruction of an arbitrary triangle soup:
/// conservatively rasterize the surface, flood-fill the exterior from the
/// grid boundary, take the complement as occupancy, and mesh its TSDF. The
/// result is closed and all interior surfaces are gone.
pub fn watertight_flood_fill(mesh: &TriMesh, resolution: usize) -> Result<TriMesh> {
    if mesh.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let (lo, hi) = mesh.bbox();
    let eps = 1e-9;
    if lo.min() < -0.5 - eps || hi.max() > 0.5 + eps {
        return Err(Error::invalid(
            "mesh larger than unit box; normalize first",
        ));
    }
    let grid = VoxelGrid::unit_box(resolution);
    let r = resolution;
    // Conservative surface marking with exact triangle-box overlap, so the
    // flood cannot leak through gaps smaller than a cell.
    let surface = mark_surface_cells(mesh, &grid);
    // BFS from all boundary cells through unmarked space.
    let mut exterior = vec![false; r * r * r];
    let mut queue = std::collections::VecDeque::new();
    for z in 0..r {
        for y in 0..r {
            for x in 0..r {
                if x == 0 || y == 0 || z == 0 || x == r - 1 || y == r - 1 || z == r - 1 {
                    let i = grid.index(x, y, z);
                    if !surface[i] && !exterior[i] {
                        exterior[i] = true;
                        queue.push_back((x, y, z));
                    }
                }
            }
        }
    }
    while let Some((x, y, z)) = queue.pop_front() {
        let neighbors = [
            (x.wrapping_sub(1), y, z),
            (x + 1, y, z),
            (x, y.wrapping_sub(1), z),
            (x, y + 1, z),
            (x, y, z.wrapping_sub(1)),
            (x, y, z + 1),
        ];
        for (nx, ny, nz) in neighbors {
            if nx >= r || ny >= r || nz >= r {
                continue;
            }
            let i = grid.index(nx, ny, nz);
            if !surface[i] && !exterior[i] {
                exterior[i] = true;
                queue.push_back((nx, ny, nz));
            }
        }
    }
    let mut occ = grid;
    for i in 0..occ.values.len() {
        occ.values[i] = if exterior[i] { 0.0 } else { 1.0 };
    }
    let tsdf = occ.occupancy_to_tsdf();
    marching_cubes(&tsdf, 0.0)
}

fn mark_surface_cells(mesh: &TriMesh, grid: &VoxelGrid) -> Vec<bool> {
    let r = grid.resolution;
    let mut marked = vec![false; r * r * r];
    let half = Vec3::repeat(grid.cell * 0.5);
    for f in 0..mesh.faces.len() {
        let tri = mesh.triangle(f);
        let tlo = tri[0].inf(&tri[1]).inf(&tri[2]);
        let thi = tri[0].sup(&tri[1]).sup(&tri[2]);
        let c0 = clamp_cell(grid, tlo);
        let c1 = clamp_cell(grid, thi);
        for z in c0[2]..=c1[2] {
            for y in c0[1]..=c1[1] {
                for x in c0[0]..=c1[0] {
                    let i = grid.index(x, y, z);
                    if marked[i] {
                        continue;
                    }
                    let center = grid.center(x, y, z);
                    if tri_box_overlap(center, half, &tri) {
                        marked[i] = true;
                    }
                }
            }
        }
    }
    marked
}

fn clamp_cell(grid: &VoxelGrid, p: Vec3) -> [usize; 3] {
    let mut c = [0usize; 3];
    for a in 0..3 {
        let x = ((p[a] - grid.origin[a]) / grid.cell).floor();
        c[a] = (x.max(0.0) as usize).min(grid.resolution - 1);
    }
    c
}

/// 3-4-5 chamfer distance transform: per-cell distance (in cell units) to
/// the nearest `true` cell. Two sweeps over the 26-neighborhood.
fn chamfer_transform(r: usize, set: &[bool]) -> Vec<f64> {
    const INF: i32 = i32::MAX / 4;
    let idx = |x: usize, y: usize, z: usize| (z * r + y) * r + x;
    let mut d: Vec<i32> = set.iter().map(|&s| if s { 0 } else { INF }).collect();
    let weight = |dx: i32, dy: i32, dz: i32| match dx.abs() + dy.abs() + dz.abs() {
        1 => 3,
        2 => 4,
        _ => 5,
    };
    let mut offsets_fwd = Vec::new();
    for dz in -1i32..=1 {
        for dy in -1i32..=1 {
            for dx in -1i32..=1 {
                if (dz, dy, dx) < (0, 0, 0) && (dz, dy, dx) != (0, 0, 0) {
                    offsets_fwd.push((dx, dy, dz, weight(dx, dy, dz)));
                }
            }
        }
    }
    let offsets_bwd: Vec<_> = offsets_fwd
        .iter()
        .map(|&(dx, dy, dz, w)| (-dx, -dy, -dz, w))
        .collect();
    let sweep = |d: &mut Vec<i32>, forward: bool, offsets: &[(i32, i32, i32, i32)]| {
        let range: Vec<usize> = if forward {
            (0..r).collect()
        } else {
            (0..r).rev().collect()
        };
        for &z in &range {
            for &y in &range {
                for &x in &range {
                    let i = idx(x, y, z);
                    if d[i] == 0 {
                        continue;
                    }
                    let mut best = d[i];
                    for &(dx, dy, dz, w) in offsets {
                        let nx = x as i32 + dx;
                        let ny = y as i32 + dy;
                        let nz = z as i32 + dz;
                        if nx < 0 || ny < 0 || nz < 0 {
                            continue;
                        }
                        let (nx, ny, nz) = (nx as usize, ny as usize, nz as usize);
                        if nx >= r || ny >= r || nz >= r {
                            continue;
                        }
                        best = best.min(d[idx(nx, ny, nz)] + w);
                    }
                    d[i] = best;
                }
            }
        }
    };
    sweep(&mut d, true, &offsets_fwd);
    sweep(&mut d, false, &offsets_bwd);
    d.into_iter().map(|v| v as f64 / 3.0).collect()
}

/// Separating-axis triangle vs axis-aligned box overlap test.
pub fn tri_box_overlap(box_center: Vec3, box_half: Vec3, tri: &[Vec3; 3]) -> bool {
    let v0 = tri[0] - box_center;
    let v1 = tri[1] - box_center;
    let v2 = tri[2] - box_center;
    let e0 = v1 - v0;
    let e1 = v2 - v1;
    let e2 = v0 - v2;

    // 9 cross-product axes.
    let axes = [
        Vec3::new(0.0, -e0.z, e0.y),
        Vec3::new(0.0, -e1.z, e1.y),
        Vec3::new(0.0, -e2.z, e2.y),
        Vec3::new(e0.z, 0.0, -e0.x),
        Vec3::new(e1.z, 0.0, -e1.x),
        Vec3::new(e2.z, 0.0, -e2.x),
        Vec3::new(-e0.y, e0.x, 0.0),
        Vec3::new(-e1.y, e1.x, 0.0),
        Vec3::new(-e2.y, e2.x, 0.0),
    ];
    for a in axes {
        let p0 = v0.dot(&a);
        let p1 = v1.dot(&a);
        let p2 = v2.dot(&a);
        let rad = box_half.x * a.x.abs() + box_half.y * a.y.abs() + box_half.z * a.z.abs();
        let mn = p0.min(p1).min(p2);
        let mx = p0.max(p1).max(p2);
        if mn > rad || mx < -rad {
            return false;
        }
    }
    // Box face normals.
    for a in 0..3 {
        let mn = v0[a].min(v1[a]).min(v2[a]);
        let mx = v0[a].max(v1[a]).max(v2[a]);
        if mn > box_half[a] || mx < -box_half[a] {
            return false;
        }
    }
    // Triangle plane.
    let normal = e0.cross(&e1);
    let d = normal.dot(&v0);
    let rad = box_half.x * normal.x.abs() + box_half.y * normal.y.abs() + box_half.z * normal.z.abs();
    d.abs() <= rad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::mesh::{box_mesh, cylinder, icosphere, plane_grid};

    #[test]
    fn central_cells_of_small_cube() {
        // Oracle: cell centers at +-0.125 are inside the half-extent 0.25
        // cube; centers at +-0.375 are not.
        let cube = box_mesh(Vec3::zeros(), Vec3::repeat(0.25));
        let grid = voxelize_occupancy(&cube, 4).unwrap();
        assert!(grid.is_occupancy());
        assert_eq!(grid.occupied_count(), 8);
        for z in 0..4 {
            for y in 0..4 {
                for x in 0..4 {
                    let expect = (1..=2).contains(&x) && (1..=2).contains(&y) && (1..=2).contains(&z);
                    assert_eq!(grid.values[grid.index(x, y, z)] > 0.5, expect);
                }
            }
        }
    }

    #[test]
    fn plane_rejected_as_non_watertight() {
        let plane = plane_grid(Vec3::zeros(), 0.4, 0.4, 4, 4);
        assert!(matches!(
            voxelize_occupancy(&plane, 8),
            Err(Error::NotWatertight)
        ));
    }

    #[test]
    fn sphere_occupied_fraction_matches_volume() {
        let sphere = icosphere(Vec3::zeros(), 0.5, 4);
        let grid = voxelize_occupancy(&sphere, 128).unwrap();
        let analytic = 4.0 / 3.0 * std::f64::consts::PI * 0.5f64.powi(3);
        assert!(
            (grid.occupied_fraction() - analytic).abs() < 0.01,
            "fraction {} vs {}",
            grid.occupied_fraction(),
            analytic
        );
    }

    #[test]
    fn iou_identity_disjoint_and_half() {
        let mut a = VoxelGrid::unit_box(4);
        let mut b = VoxelGrid::unit_box(4);
        assert_eq!(grid_iou(&a, &b).unwrap(), 1.0);
        for i in 0..8 {
            a.values[i] = 1.0;
        }
        assert_eq!(grid_iou(&a, &a).unwrap(), 1.0);
        for i in 8..16 {
            b.values[i] = 1.0;
        }
        assert_eq!(grid_iou(&a, &b).unwrap(), 0.0);
        // b = same 8 plus 8 more.
        for i in 0..8 {
            b.values[i] = 1.0;
        }
        assert_eq!(grid_iou(&a, &b).unwrap(), 0.5);
        let c = VoxelGrid::unit_box(8);
        assert!(grid_iou(&a, &c).is_err());
    }

    #[test]
    fn flood_fill_round_trips_cube() {
        let cube = box_mesh(Vec3::zeros(), Vec3::repeat(0.3));
        let out = watertight_flood_fill(&cube, 64).unwrap();
        assert!(out.is_watertight());
        // Hausdorff within one cell size, measured by sampled distances.
        let cell = 1.0 / 64.0;
        let accel = TriGrid::build(&cube);
        let samples = crate::geom::sample_surface(&out, 2000, 3).unwrap();
        for p in &samples.positions {
            let (d, _, _) = accel.closest_point(*p);
            assert!(d <= cell + 1e-9, "distance {d} exceeds cell {cell}");
        }
    }

    #[test]
    fn flood_fill_removes_interior_cube() {
        let outer = box_mesh(Vec3::zeros(), Vec3::repeat(0.4));
        let inner = box_mesh(Vec3::zeros(), Vec3::repeat(0.1));
        let mut vertices = outer.vertices.clone();
        let mut faces = outer.faces.clone();
        let off = vertices.len() as u32;
        vertices.extend_from_slice(&inner.vertices);
        faces.extend(inner.faces.iter().map(|f| [f[0] + off, f[1] + off, f[2] + off]));
        let soup = TriMesh::new(vertices, faces).unwrap();
        let out = watertight_flood_fill(&soup, 64).unwrap();
        assert!(out.is_watertight());
        // Interior surface gone: no output vertex near the inner cube.
        for v in &out.vertices {
            let m = v.x.abs().max(v.y.abs()).max(v.z.abs());
            assert!(m > 0.2, "vertex {v} near interior surface");
        }
    }

    #[test]
    fn flood_fill_caps_open_cylinder() {
        let cyl = cylinder(Vec3::zeros(), 0.25, 0.35, 48, 6);
        // Drop cap fans to open the cylinder.
        let side_faces: Vec<[u32; 3]> = cyl
            .faces
            .iter()
            .copied()
            .filter(|f| {
                let tri = [
                    cyl.vertices[f[0] as usize],
                    cyl.vertices[f[1] as usize],
                    cyl.vertices[f[2] as usize],
                ];
                tri.iter().all(|v| (v.x * v.x + v.z * v.z).sqrt() > 0.2)
            })
            .collect();
        let open = TriMesh::new(cyl.vertices.clone(), side_faces).unwrap();
        assert!(!open.is_watertight());
        let out = watertight_flood_fill(&open, 128).unwrap();
        assert!(out.is_watertight(), "flood fill must close the cylinder");
    }

    #[test]
    fn oversized_mesh_rejected() {
        let big = box_mesh(Vec3::zeros(), Vec3::repeat(0.6));
        assert!(watertight_flood_fill(&big, 32).is_err());
    }

    #[test]
    fn voxelize_and_flood_fill_agree() {
        let sphere = icosphere(Vec3::zeros(), 0.35, 3);
        let res = 128;
        let direct = voxelize_occupancy(&sphere, res).unwrap();
        let grid = VoxelGrid::unit_box(res);
        let surface = mark_surface_cells(&sphere, &grid);
        // Recompute flood occupancy without meshing.
        let remeshed = watertight_flood_fill(&sphere, res).unwrap();
        let refilled = voxelize_occupancy(&remeshed, res).unwrap();
        let agree = direct
            .values
            .iter()
            .zip(&refilled.values)
            .filter(|(a, b)| (**a > 0.5) == (**b > 0.5))
            .count();
        let frac = agree as f64 / direct.len() as f64;
        assert!(frac >= 0.99, "agreement {frac}");
        let _ = surface;
    }

    #[test]
    fn tsdf_band_is_clamped() {
        let cube = box_mesh(Vec3::zeros(), Vec3::repeat(0.25));
        let occ = voxelize_occupancy(&cube, 32).unwrap();
        let tsdf = occ.occupancy_to_tsdf();
        let band = TSDF_BAND_CELLS * tsdf.cell;
        for &v in &tsdf.values {
            assert!(v.abs() <= band + 1e-12);
        }
    }

    #[test]
    fn tri_box_overlap_basics() {
        let tri = [
            Vec3::new(-1.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        assert!(tri_box_overlap(Vec3::zeros(), Vec3::repeat(0.5), &tri));
        assert!(!tri_box_overlap(Vec3::new(0.0, 0.0, 2.0), Vec3::repeat(0.5), &tri));
        // Box pierced by the triangle interior (no vertex inside).
        assert!(tri_box_overlap(Vec3::new(0.0, 0.25, 0.0), Vec3::repeat(0.1), &tri));
    }
}
