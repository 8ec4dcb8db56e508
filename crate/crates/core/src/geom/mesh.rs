use std::collections::HashMap;

use super::Vec3;
use crate::{Error, Result};

/// Indexed triangle mesh in unit-box normalized coordinates.
///
/// Face indices always address valid vertices and degenerate (zero-area)
/// faces are dropped at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    /// Per-vertex texture coordinates, when present.
    pub uv: Option<Vec<[f64; 2]>>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Result<Self> {
        let n = vertices.len() as u32;
        for f in &faces {
            if f[0] >= n || f[1] >= n || f[2] >= n {
                return Err(Error::invalid(format!(
                    "face {:?} references vertex beyond count {}",
                    f, n
                )));
            }
        }
        let faces = faces
            .into_iter()
            .filter(|f| {
                if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                    return false;
                }
                let a = vertices[f[0] as usize];
                let b = vertices[f[1] as usize];
                let c = vertices[f[2] as usize];
                (b - a).cross(&(c - a)).norm() > 0.0
            })
            .collect();
        Ok(TriMesh {
            vertices,
            faces,
            uv: None,
        })
    }

    pub fn with_uv(mut self, uv: Vec<[f64; 2]>) -> Result<Self> {
        if uv.len() != self.vertices.len() {
            return Err(Error::invalid("uv count must match vertex count"));
        }
        self.uv = Some(uv);
        Ok(self)
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn triangle(&self, f: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn face_normal(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.triangle(f);
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        if len > 0.0 {
            n / len
        } else {
            Vec3::zeros()
        }
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.triangle(f);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    pub fn bbox(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    pub fn centroid(&self) -> Vec3 {
        let mut c = Vec3::zeros();
        for v in &self.vertices {
            c += v;
        }
        c / self.vertices.len().max(1) as f64
    }

    /// Map over undirected edges to the faces incident on each.
    pub fn edge_faces(&self) -> HashMap<(u32, u32), Vec<u32>> {
        let mut map: HashMap<(u32, u32), Vec<u32>> = HashMap::new();
        for (fi, f) in self.faces.iter().enumerate() {
            for k in 0..3 {
                let a = f[k];
                let b = f[(k + 1) % 3];
                let key = (a.min(b), a.max(b));
                map.entry(key).or_default().push(fi as u32);
            }
        }
        map
    }

    /// Closed orientable surface test: every undirected edge is shared by
    /// exactly two faces with opposite winding.
    pub fn is_watertight(&self) -> bool {
        if self.faces.is_empty() {
            return false;
        }
        let mut directed: HashMap<(u32, u32), i32> = HashMap::new();
        for f in &self.faces {
            for k in 0..3 {
                let a = f[k];
                let b = f[(k + 1) % 3];
                *directed.entry((a.min(b), a.max(b))).or_insert(0) +=
                    if a < b { 1 } else { -1 };
            }
        }
        let edge_faces = self.edge_faces();
        edge_faces.values().all(|fs| fs.len() == 2) && directed.values().all(|&c| c == 0)
    }

    /// Every edge has at most two incident faces.
    pub fn is_edge_manifold(&self) -> bool {
        self.edge_faces().values().all(|fs| fs.len() <= 2)
    }

    pub fn euler_characteristic(&self) -> i64 {
        let v = self.vertices.len() as i64;
        let e = self.edge_faces().len() as i64;
        let f = self.faces.len() as i64;
        v - e + f
    }

    /// Number of connected components over face-edge adjacency.
    pub fn connected_components(&self) -> usize {
        if self.vertices.is_empty() {
            return 0;
        }
        let mut parent: Vec<u32> = (0..self.vertices.len() as u32).collect();
        fn find(parent: &mut [u32], x: u32) -> u32 {
            let mut root = x;
            while parent[root as usize] != root {
                root = parent[root as usize];
            }
            let mut cur = x;
            while parent[cur as usize] != root {
                let next = parent[cur as usize];
                parent[cur as usize] = root;
                cur = next;
            }
            root
        }
        for f in &self.faces {
            let r0 = find(&mut parent, f[0]);
            let r1 = find(&mut parent, f[1]);
            let r2 = find(&mut parent, f[2]);
            parent[r1 as usize] = r0;
            parent[r2 as usize] = r0;
        }
        let mut roots: Vec<u32> = (0..self.vertices.len() as u32)
            .filter(|&v| self.vertex_used(v))
            .map(|v| find(&mut parent, v))
            .collect();
        roots.sort_unstable();
        roots.dedup();
        roots.len()
    }

    fn vertex_used(&self, v: u32) -> bool {
        self.faces.iter().any(|f| f.contains(&v))
    }

    /// Applies `f` to every vertex position in place.
    pub fn map_vertices(&mut self, f: impl Fn(Vec3) -> Vec3) {
        for v in &mut self.vertices {
            *v = f(*v);
        }
    }

    /// Barycentric point on face `f`.
    pub fn bary_point(&self, f: usize, w: [f64; 3]) -> Vec3 {
        let [a, b, c] = self.triangle(f);
        a * w[0] + b * w[1] + c * w[2]
    }
}

/// Axis-aligned box mesh (12 triangles, outward winding).
pub fn box_mesh(center: Vec3, half_extents: Vec3) -> TriMesh {
    let h = half_extents;
    let corners: Vec<Vec3> = (0..8)
        .map(|i| {
            Vec3::new(
                center.x + if i & 1 == 0 { -h.x } else { h.x },
                center.y + if i & 2 == 0 { -h.y } else { h.y },
                center.z + if i & 4 == 0 { -h.z } else { h.z },
            )
        })
        .collect();
    // Each face as two triangles with outward orientation.
    let quads: [[u32; 4]; 6] = [
        [0, 2, 3, 1], // -z
        [4, 5, 7, 6], // +z
        [0, 1, 5, 4], // -y
        [2, 6, 7, 3], // +y
        [0, 4, 6, 2], // -x
        [1, 3, 7, 5], // +x
    ];
    let mut faces = Vec::with_capacity(12);
    for q in quads {
        faces.push([q[0], q[1], q[2]]);
        faces.push([q[0], q[2], q[3]]);
    }
    TriMesh::new(corners, faces).expect("box mesh is valid")
}

/// Icosphere with the given number of subdivision levels.
pub fn icosphere(center: Vec3, radius: f64, subdivisions: u32) -> TriMesh {
    let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let mut vertices = vec![
        Vec3::new(-1.0, phi, 0.0),
        Vec3::new(1.0, phi, 0.0),
        Vec3::new(-1.0, -phi, 0.0),
        Vec3::new(1.0, -phi, 0.0),
        Vec3::new(0.0, -1.0, phi),
        Vec3::new(0.0, 1.0, phi),
        Vec3::new(0.0, -1.0, -phi),
        Vec3::new(0.0, 1.0, -phi),
        Vec3::new(phi, 0.0, -1.0),
        Vec3::new(phi, 0.0, 1.0),
        Vec3::new(-phi, 0.0, -1.0),
        Vec3::new(-phi, 0.0, 1.0),
    ];
    for v in &mut vertices {
        *v = v.normalize();
    }
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(u32, u32), u32> = HashMap::new();
        let mut new_faces = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let mut mids = [0u32; 3];
            for k in 0..3 {
                let a = f[k];
                let b = f[(k + 1) % 3];
                let key = (a.min(b), a.max(b));
                mids[k] = *midpoint.entry(key).or_insert_with(|| {
                    let m = (vertices[a as usize] + vertices[b as usize]).normalize();
                    vertices.push(m);
                    (vertices.len() - 1) as u32
                });
            }
            new_faces.push([f[0], mids[0], mids[2]]);
            new_faces.push([f[1], mids[1], mids[0]]);
            new_faces.push([f[2], mids[2], mids[1]]);
            new_faces.push([mids[0], mids[1], mids[2]]);
        }
        faces = new_faces;
    }
    for v in &mut vertices {
        *v = center + *v * radius;
    }
    TriMesh::new(vertices, faces).expect("icosphere is valid")
}

/// Closed cylinder along +y with triangulated caps.
pub fn cylinder(center: Vec3, radius: f64, half_height: f64, segments: u32, stacks: u32) -> TriMesh {
    assert!(segments >= 3 && stacks >= 1);
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    // Side rings bottom to top.
    for s in 0..=stacks {
        let y = -half_height + 2.0 * half_height * s as f64 / stacks as f64;
        for i in 0..segments {
            let a = 2.0 * std::f64::consts::PI * i as f64 / segments as f64;
            vertices.push(center + Vec3::new(radius * a.cos(), y, radius * a.sin()));
        }
    }
    for s in 0..stacks {
        for i in 0..segments {
            let i1 = (i + 1) % segments;
            let v00 = s * segments + i;
            let v01 = s * segments + i1;
            let v10 = (s + 1) * segments + i;
            let v11 = (s + 1) * segments + i1;
            faces.push([v00, v10, v01]);
            faces.push([v01, v10, v11]);
        }
    }
    // Caps with center fans.
    let bottom_center = vertices.len() as u32;
    vertices.push(center + Vec3::new(0.0, -half_height, 0.0));
    let top_center = vertices.len() as u32;
    vertices.push(center + Vec3::new(0.0, half_height, 0.0));
    for i in 0..segments {
        let i1 = (i + 1) % segments;
        faces.push([bottom_center, i, i1]);
        let t0 = stacks * segments + i;
        let t1 = stacks * segments + i1;
        faces.push([top_center, t1, t0]);
    }
    TriMesh::new(vertices, faces).expect("cylinder is valid")
}

/// Open rectangular grid in the xy plane at z = 0 (not watertight).
pub fn plane_grid(center: Vec3, half_w: f64, half_h: f64, nx: u32, ny: u32) -> TriMesh {
    assert!(nx >= 1 && ny >= 1);
    let mut vertices = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            let x = -half_w + 2.0 * half_w * i as f64 / nx as f64;
            let y = -half_h + 2.0 * half_h * j as f64 / ny as f64;
            vertices.push(center + Vec3::new(x, y, 0.0));
        }
    }
    let mut faces = Vec::new();
    let w = nx + 1;
    for j in 0..ny {
        for i in 0..nx {
            let v00 = j * w + i;
            let v01 = j * w + i + 1;
            let v10 = (j + 1) * w + i;
            let v11 = (j + 1) * w + i + 1;
            faces.push([v00, v01, v11]);
            faces.push([v00, v11, v10]);
        }
    }
    TriMesh::new(vertices, faces).expect("plane grid is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_is_watertight_with_euler_2() {
        let m = box_mesh(Vec3::zeros(), Vec3::repeat(0.5));
        assert!(m.is_watertight());
        assert_eq!(m.euler_characteristic(), 2);
        assert_eq!(m.connected_components(), 1);
    }

    #[test]
    fn icosphere_watertight_and_unit_radius() {
        let m = icosphere(Vec3::zeros(), 0.5, 2);
        assert!(m.is_watertight());
        assert_eq!(m.euler_characteristic(), 2);
        for v in &m.vertices {
            assert!((v.norm() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn cylinder_watertight() {
        let m = cylinder(Vec3::zeros(), 0.3, 0.4, 24, 4);
        assert!(m.is_watertight());
    }

    #[test]
    fn plane_is_open() {
        let m = plane_grid(Vec3::zeros(), 0.4, 0.3, 8, 6);
        assert!(!m.is_watertight());
        assert!(m.is_edge_manifold());
    }

    #[test]
    fn degenerate_faces_dropped() {
        let verts = vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)];
        let m = TriMesh::new(verts, vec![[0, 1, 2], [0, 1, 1], [2, 2, 0]]).unwrap();
        assert_eq!(m.faces.len(), 1);
    }

    #[test]
    fn out_of_range_face_rejected() {
        let verts = vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0)];
        assert!(TriMesh::new(verts, vec![[0, 1, 2]]).is_err());
    }

    #[test]
    fn box_volume_via_divergence() {
        // Signed volume of the closed box should match the analytic volume.
        let m = box_mesh(Vec3::new(0.1, -0.05, 0.2), Vec3::new(0.25, 0.2, 0.15));
        let mut vol = 0.0;
        for f in 0..m.faces.len() {
            let [a, b, c] = m.triangle(f);
            vol += a.dot(&b.cross(&c)) / 6.0;
        }
        let expect = 0.5 * 0.4 * 0.3;
        assert!((vol - expect).abs() < 1e-12, "vol {vol} vs {expect}");
    }
}
