//! Exact nearest-neighbor search over 3D points.
//!
//! Median-split kd-tree. Queries return exactly the brute-force nearest
//! neighbor (ties broken toward the lowest index) so accelerated metrics are
//! interchangeable with their O(N·M) oracles.

use super::Vec3;

pub struct KdTree {
    points: Vec<Vec3>,
    // Tree laid out as: node covers indices[lo..hi); internal nodes store the
    // splitting point at the median position.
    indices: Vec<u32>,
    nodes: Vec<Node>,
}

#[derive(Clone, Copy)]
struct Node {
    lo: u32,
    hi: u32,
    axis: u8,
    split: f64,
    left: i32,
    right: i32,
}

const LEAF_SIZE: usize = 16;

impl KdTree {
    pub fn build(points: &[Vec3]) -> Self {
        let mut indices: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::new();
        if !points.is_empty() {
            build_node(points, &mut indices, 0, points.len(), &mut nodes);
        }
        KdTree {
            points: points.to_vec(),
            indices,
            nodes,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index and squared distance of the nearest point to `q`.
    pub fn nearest(&self, q: &Vec3) -> (usize, f64) {
        assert!(!self.points.is_empty(), "nearest on empty tree");
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, q, &mut best);
        best
    }

    fn search(&self, node: i32, q: &Vec3, best: &mut (usize, f64)) {
        let n = self.nodes[node as usize];
        if n.left < 0 {
            for &i in &self.indices[n.lo as usize..n.hi as usize] {
                let d2 = (self.points[i as usize] - q).norm_squared();
                if d2 < best.1 || (d2 == best.1 && (i as usize) < best.0) {
                    *best = (i as usize, d2);
                }
            }
            return;
        }
        let delta = q[n.axis as usize] - n.split;
        let (near, far) = if delta <= 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        self.search(near, q, best);
        if delta * delta <= best.1 {
            self.search(far, q, best);
        }
    }
}

fn build_node(points: &[Vec3], indices: &mut [u32], lo: usize, hi: usize, nodes: &mut Vec<Node>) -> i32 {
    let id = nodes.len() as i32;
    nodes.push(Node {
        lo: lo as u32,
        hi: hi as u32,
        axis: 0,
        split: 0.0,
        left: -1,
        right: -1,
    });
    if hi - lo <= LEAF_SIZE {
        return id;
    }
    // Split along the widest axis at the median.
    let mut min = Vec3::repeat(f64::INFINITY);
    let mut max = Vec3::repeat(f64::NEG_INFINITY);
    for &i in &indices[lo..hi] {
        min = min.inf(&points[i as usize]);
        max = max.sup(&points[i as usize]);
    }
    let ext = max - min;
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    let mid = lo + (hi - lo) / 2;
    indices[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
        let ka = points[a as usize][axis];
        let kb = points[b as usize][axis];
        ka.partial_cmp(&kb).unwrap().then(a.cmp(&b))
    });
    let split = points[indices[mid] as usize][axis];
    let left = build_node(points, indices, lo, mid, nodes);
    let right = build_node(points, indices, mid, hi, nodes);
    let n = &mut nodes[id as usize];
    n.axis = axis as u8;
    n.split = split;
    n.left = left;
    n.right = right;
    id
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn brute(points: &[Vec3], q: &Vec3) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, p) in points.iter().enumerate() {
            let d2 = (p - q).norm_squared();
            if d2 < best.1 {
                best = (i, d2);
            }
        }
        best
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = crate::rng::rng(42);
        let points: Vec<Vec3> = (0..700)
            .map(|_| Vec3::new(rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()))
            .collect();
        let tree = KdTree::build(&points);
        for _ in 0..300 {
            let q = Vec3::new(rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>());
            let (bi, bd) = brute(&points, &q);
            let (ti, td) = tree.nearest(&q);
            assert_eq!(bi, ti);
            assert_eq!(bd, td);
        }
    }

    #[test]
    fn single_point() {
        let tree = KdTree::build(&[Vec3::new(1.0, 2.0, 3.0)]);
        let (i, d2) = tree.nearest(&Vec3::new(1.0, 2.0, 4.0));
        assert_eq!(i, 0);
        assert!((d2 - 1.0).abs() < 1e-15);
    }
}
