//! Farthest point sampling.

use super::{PointCloud, Vec3};
use crate::par;
use crate::{Error, Result};

/// Greedy max-min subset selection. `seed` selects the first index
/// (`seed % N`); each following pick is the point farthest from the selected
/// set, ties broken toward the lowest index. Selection distances are
/// non-increasing by construction.
pub fn farthest_point_sample(cloud: &PointCloud, k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = cloud.len();
    if n == 0 {
        return Err(Error::EmptyCloud);
    }
    if k > n {
        return Err(Error::invalid(format!("k = {} exceeds cloud size {}", k, n)));
    }
    let positions = &cloud.positions;
    let first = (seed % n as u64) as usize;
    let mut selected = Vec::with_capacity(k);
    selected.push(first);
    let mut min_d2 = vec![f64::INFINITY; n];
    let mut last = first;
    for _ in 1..k {
        last = update_and_argmax(positions, &mut min_d2, positions[last]);
        selected.push(last);
    }
    Ok(selected)
}

/// Folds `min(dist to p)` into `min_d2` and returns the argmax index.
/// Chunked so the result does not depend on thread count; the global argmax
/// is folded over per-chunk maxima in chunk order.
fn update_and_argmax(positions: &[Vec3], min_d2: &mut [f64], p: Vec3) -> usize {
    let chunk = par::DEFAULT_CHUNK;
    let pairs: Vec<(usize, &mut [f64])> = min_d2.chunks_mut(chunk).enumerate().collect();
    let per_chunk = run_chunks(pairs, positions, p, chunk);
    let mut best = (f64::NEG_INFINITY, usize::MAX);
    for &(d, i) in &per_chunk {
        if d > best.0 {
            best = (d, i);
        }
    }
    best.1
}

fn chunk_pass(ci: usize, dists: &mut [f64], positions: &[Vec3], p: Vec3, chunk: usize) -> (f64, usize) {
    let base = ci * chunk;
    let mut best = (f64::NEG_INFINITY, usize::MAX);
    for (off, d) in dists.iter_mut().enumerate() {
        let d2 = (positions[base + off] - p).norm_squared();
        if d2 < *d {
            *d = d2;
        }
        if *d > best.0 {
            best = (*d, base + off);
        }
    }
    best
}

#[cfg(feature = "parallel")]
fn run_chunks(pairs: Vec<(usize, &mut [f64])>, positions: &[Vec3], p: Vec3, chunk: usize) -> Vec<(f64, usize)> {
    use rayon::prelude::*;
    pairs
        .into_par_iter()
        .map(|(ci, dists)| chunk_pass(ci, dists, positions, p, chunk))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn run_chunks(pairs: Vec<(usize, &mut [f64])>, positions: &[Vec3], p: Vec3, chunk: usize) -> Vec<(f64, usize)> {
    pairs
        .into_iter()
        .map(|(ci, dists)| chunk_pass(ci, dists, positions, p, chunk))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;

    fn line_cloud() -> PointCloud {
        PointCloud::new(vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
            Vec3::new(10.0, 0.0, 0.0),
        ])
    }

    #[test]
    fn colinear_picks_extremes() {
        // Brute-force oracle: from index 0 the farthest point is x=10 (index 3).
        let idx = farthest_point_sample(&line_cloud(), 2, 0).unwrap();
        assert_eq!(idx, vec![0, 3]);
    }

    #[test]
    fn k_equals_n_is_permutation() {
        let cloud = line_cloud();
        let mut idx = farthest_point_sample(&cloud, 4, 1).unwrap();
        idx.sort_unstable();
        assert_eq!(idx, vec![0, 1, 2, 3]);
    }

    #[test]
    fn k_too_large_errors() {
        assert!(farthest_point_sample(&line_cloud(), 5, 0).is_err());
    }

    #[test]
    fn matches_brute_force_greedy() {
        use rand::Rng;
        let mut rng = crate::rng::rng(11);
        let cloud = PointCloud::new(
            (0..300)
                .map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen()))
                .collect(),
        );
        let got = farthest_point_sample(&cloud, 24, 7).unwrap();
        // Independent brute-force greedy selection.
        let mut expect = vec![7 % 300];
        while expect.len() < 24 {
            let mut best = (f64::NEG_INFINITY, usize::MAX);
            for i in 0..cloud.len() {
                let d = expect
                    .iter()
                    .map(|&j| (cloud.positions[j] - cloud.positions[i]).norm_squared())
                    .fold(f64::INFINITY, f64::min);
                if d > best.0 {
                    best = (d, i);
                }
            }
            expect.push(best.1);
        }
        assert_eq!(got, expect);
    }

    #[test]
    fn selection_distances_non_increasing() {
        use rand::Rng;
        let mut rng = crate::rng::rng(3);
        let cloud = PointCloud::new(
            (0..2057)
                .map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen()))
                .collect(),
        );
        let idx = farthest_point_sample(&cloud, 128, 5).unwrap();
        let mut prev = f64::INFINITY;
        for i in 1..idx.len() {
            let p = cloud.positions[idx[i]];
            let d = idx[..i]
                .iter()
                .map(|&j| (cloud.positions[j] - p).norm_squared())
                .fold(f64::INFINITY, f64::min);
            assert!(d <= prev + 1e-12, "selection distance increased");
            prev = d;
        }
        let mut sorted = idx.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), idx.len());
    }
}
