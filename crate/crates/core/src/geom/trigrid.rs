//! Uniform-grid triangle acceleration for ray parity tests and closest-point
//! queries. Exact queries; the grid only prunes candidates.

use super::{TriMesh, Vec3};

pub struct TriGrid {
    tris: Vec<[Vec3; 3]>,
    origin: Vec3,
    cell: f64,
    res: [usize; 3],
    cells: Vec<Vec<u32>>,
}

impl TriGrid {
    pub fn build(mesh: &TriMesh) -> Self {
        let tris: Vec<[Vec3; 3]> = (0..mesh.faces.len()).map(|f| mesh.triangle(f)).collect();
        let (mut lo, mut hi) = mesh.bbox();
        if tris.is_empty() {
            lo = Vec3::zeros();
            hi = Vec3::repeat(1.0);
        }
        // Pad so boundary triangles never fall outside the grid.
        let extent = hi - lo;
        let diag = extent.norm().max(1e-9);
        lo -= Vec3::repeat(1e-6 * diag);
        hi += Vec3::repeat(1e-6 * diag);
        let target = ((tris.len() as f64).cbrt() * 2.0).ceil().clamp(4.0, 64.0) as usize;
        let max_extent = (hi - lo).max().max(1e-9);
        let cell = max_extent / target as f64;
        let res = [
            (((hi.x - lo.x) / cell).ceil() as usize).max(1),
            (((hi.y - lo.y) / cell).ceil() as usize).max(1),
            (((hi.z - lo.z) / cell).ceil() as usize).max(1),
        ];
        let mut cells = vec![Vec::new(); res[0] * res[1] * res[2]];
        for (ti, tri) in tris.iter().enumerate() {
            let (tlo, thi) = tri_bbox(tri);
            let a = cell_of(lo, cell, res, tlo);
            let b = cell_of(lo, cell, res, thi);
            for z in a[2]..=b[2] {
                for y in a[1]..=b[1] {
                    for x in a[0]..=b[0] {
                        cells[(z * res[1] + y) * res[0] + x].push(ti as u32);
                    }
                }
            }
        }
        TriGrid {
            tris,
            origin: lo,
            cell,
            res,
            cells,
        }
    }

    pub fn num_triangles(&self) -> usize {
        self.tris.len()
    }

    /// Number of ray-triangle crossings with t > 0 along `origin + t*dir`.
    /// Each triangle is tested once even when it spans multiple cells.
    pub fn ray_crossings(&self, origin: Vec3, dir: Vec3) -> usize {
        let mut candidates: Vec<u32> = Vec::with_capacity(64);
        self.walk_ray(origin, dir, &mut candidates);
        candidates.sort_unstable();
        candidates.dedup();
        candidates
            .iter()
            .filter(|&&ti| {
                ray_triangle(origin, dir, &self.tris[ti as usize]).is_some()
            })
            .count()
    }

    /// True when `p` is inside the closed surface, by ray parity along `dir`.
    pub fn contains(&self, p: Vec3, dir: Vec3) -> bool {
        self.ray_crossings(p, dir) % 2 == 1
    }

    /// Exact closest point on the surface: (distance, point, triangle id).
    pub fn closest_point(&self, q: Vec3) -> (f64, Vec3, u32) {
        assert!(!self.tris.is_empty());
        let qc = cell_of(self.origin, self.cell, self.res, q);
        let max_r = self.res[0].max(self.res[1]).max(self.res[2]);
        let mut best = (f64::INFINITY, Vec3::zeros(), u32::MAX);
        let mut seen: Vec<u32> = Vec::with_capacity(64);
        for r in 0..=max_r {
            // Cells at Chebyshev radius >= r are at least (r-1)*cell away
            // from any point inside the query's own cell.
            if r > 1 && best.0 <= (r - 1) as f64 * self.cell {
                break;
            }
            self.visit_shell(qc, r, |cell_tris| {
                for &ti in cell_tris {
                    if seen.binary_search(&ti).is_ok() {
                        continue;
                    }
                    let pos = seen.binary_search(&ti).unwrap_err();
                    seen.insert(pos, ti);
                    let cp = closest_point_triangle(q, &self.tris[ti as usize]);
                    let d = (cp - q).norm();
                    if d < best.0 {
                        best = (d, cp, ti);
                    }
                }
            });
        }
        best
    }

    /// Signed distance to the surface (negative inside). `dir` is the parity
    /// ray direction.
    pub fn signed_distance(&self, q: Vec3, dir: Vec3) -> f64 {
        let (d, _, _) = self.closest_point(q);
        if self.contains(q, dir) {
            -d
        } else {
            d
        }
    }

    fn visit_shell(&self, center: [usize; 3], r: usize, mut f: impl FnMut(&[u32])) {
        let lo = [
            center[0].saturating_sub(r),
            center[1].saturating_sub(r),
            center[2].saturating_sub(r),
        ];
        let hi = [
            (center[0] + r).min(self.res[0] - 1),
            (center[1] + r).min(self.res[1] - 1),
            (center[2] + r).min(self.res[2] - 1),
        ];
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    let cheb = x
                        .abs_diff(center[0])
                        .max(y.abs_diff(center[1]))
                        .max(z.abs_diff(center[2]));
                    if cheb != r {
                        continue;
                    }
                    f(&self.cells[(z * self.res[1] + y) * self.res[0] + x]);
                }
            }
        }
    }

    /// 3D-DDA over grid cells pierced by the ray, collecting candidates.
    fn walk_ray(&self, origin: Vec3, dir: Vec3, out: &mut Vec<u32>) {
        let res = self.res;
        let grid_hi = self.origin
            + Vec3::new(
                res[0] as f64 * self.cell,
                res[1] as f64 * self.cell,
                res[2] as f64 * self.cell,
            );
        // Clip ray to the grid box.
        let mut t0: f64 = 0.0;
        let mut t1 = f64::INFINITY;
        for a in 0..3 {
            let inv = 1.0 / dir[a];
            let mut ta = (self.origin[a] - origin[a]) * inv;
            let mut tb = (grid_hi[a] - origin[a]) * inv;
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
        }
        if t0 > t1 {
            return;
        }
        let start = origin + dir * (t0 + 1e-12);
        let mut c = cell_of(self.origin, self.cell, res, start);
        let step: [isize; 3] = [
            if dir.x > 0.0 { 1 } else { -1 },
            if dir.y > 0.0 { 1 } else { -1 },
            if dir.z > 0.0 { 1 } else { -1 },
        ];
        let mut t_max = [0.0f64; 3];
        let mut t_delta = [0.0f64; 3];
        for a in 0..3 {
            let next_boundary = self.origin[a]
                + (c[a] as f64 + if step[a] > 0 { 1.0 } else { 0.0 }) * self.cell;
            t_max[a] = (next_boundary - origin[a]) / dir[a];
            t_delta[a] = self.cell / dir[a].abs();
        }
        loop {
            out.extend_from_slice(&self.cells[(c[2] * res[1] + c[1]) * res[0] + c[0]]);
            let a = if t_max[0] <= t_max[1] && t_max[0] <= t_max[2] {
                0
            } else if t_max[1] <= t_max[2] {
                1
            } else {
                2
            };
            if t_max[a] > t1 {
                break;
            }
            let next = c[a] as isize + step[a];
            if next < 0 || next as usize >= res[a] {
                break;
            }
            c[a] = next as usize;
            t_max[a] += t_delta[a];
        }
    }
}

fn tri_bbox(tri: &[Vec3; 3]) -> (Vec3, Vec3) {
    let lo = tri[0].inf(&tri[1]).inf(&tri[2]);
    let hi = tri[0].sup(&tri[1]).sup(&tri[2]);
    (lo, hi)
}

fn cell_of(origin: Vec3, cell: f64, res: [usize; 3], p: Vec3) -> [usize; 3] {
    let mut c = [0usize; 3];
    for a in 0..3 {
        let x = ((p[a] - origin[a]) / cell).floor();
        c[a] = (x.max(0.0) as usize).min(res[a] - 1);
    }
    c
}

/// Moller-Trumbore, counting crossings strictly ahead of the origin.
fn ray_triangle(origin: Vec3, dir: Vec3, tri: &[Vec3; 3]) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let pvec = dir.cross(&e2);
    let det = e1.dot(&pvec);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv_det = 1.0 / det;
    let tvec = origin - tri[0];
    let u = tvec.dot(&pvec) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(&e1);
    let v = dir.dot(&qvec) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&qvec) * inv_det;
    if t > 1e-12 {
        Some(t)
    } else {
        None
    }
}

/// Closest point on a triangle (Ericson, Real-Time Collision Detection).
pub fn closest_point_triangle(p: Vec3, tri: &[Vec3; 3]) -> Vec3 {
    let [a, b, c] = *tri;
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// A fixed, grid-independent parity ray direction that avoids axis-aligned
/// degeneracies.
pub fn parity_direction() -> Vec3 {
    Vec3::new(0.017_339, 0.029_671, 1.0).normalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::mesh::{box_mesh, icosphere};

    #[test]
    fn contains_matches_analytic_box() {
        let m = box_mesh(Vec3::zeros(), Vec3::new(0.3, 0.2, 0.25));
        let grid = TriGrid::build(&m);
        let dir = parity_direction();
        assert!(grid.contains(Vec3::zeros(), dir));
        assert!(grid.contains(Vec3::new(0.29, 0.19, 0.24), dir));
        assert!(!grid.contains(Vec3::new(0.31, 0.0, 0.0), dir));
        assert!(!grid.contains(Vec3::new(0.0, 0.0, 0.6), dir));
    }

    #[test]
    fn signed_distance_matches_sphere() {
        let m = icosphere(Vec3::zeros(), 0.4, 3);
        let grid = TriGrid::build(&m);
        let dir = parity_direction();
        use rand::Rng;
        let mut r = crate::rng::rng(1);
        for _ in 0..200 {
            let q = Vec3::new(
                r.gen_range(-0.5..0.5),
                r.gen_range(-0.5..0.5),
                r.gen_range(-0.5..0.5),
            );
            let sd = grid.signed_distance(q, dir);
            let analytic = q.norm() - 0.4;
            // Icosphere slightly under-approximates the sphere.
            assert!(
                (sd - analytic).abs() < 0.01,
                "q {q} sd {sd} analytic {analytic}"
            );
        }
    }

    #[test]
    fn closest_point_matches_brute_force() {
        let m = icosphere(Vec3::new(0.1, -0.05, 0.0), 0.35, 2);
        let grid = TriGrid::build(&m);
        use rand::Rng;
        let mut r = crate::rng::rng(2);
        for _ in 0..100 {
            let q = Vec3::new(
                r.gen_range(-0.8..0.8),
                r.gen_range(-0.8..0.8),
                r.gen_range(-0.8..0.8),
            );
            let (d, _, _) = grid.closest_point(q);
            let mut brute = f64::INFINITY;
            for f in 0..m.faces.len() {
                let cp = closest_point_triangle(q, &m.triangle(f));
                brute = brute.min((cp - q).norm());
            }
            assert!((d - brute).abs() < 1e-12, "grid {d} brute {brute}");
        }
    }
}
