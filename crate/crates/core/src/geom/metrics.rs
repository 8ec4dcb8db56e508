//! Point-cloud geometric metrics.

use super::{KdTree, PointCloud};
use crate::par;
use crate::{Error, Result};

/// Symmetric Chamfer distance: half the sum of both directional mean
/// nearest-neighbor L2 distances. With `truncation` set, each per-point
/// distance is clamped before averaging.
pub fn chamfer(a: &PointCloud, b: &PointCloud, truncation: Option<f64>) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let ab = directional_mean(a, b, truncation);
    let ba = directional_mean(b, a, truncation);
    Ok(0.5 * (ab + ba))
}

/// F-Score at threshold `tau`: harmonic mean of precision (fraction of `a`
/// within `tau` of `b`) and recall (fraction of `b` within `tau` of `a`).
pub fn fscore(a: &PointCloud, b: &PointCloud, tau: f64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if tau <= 0.0 {
        return Err(Error::invalid("tau must be positive"));
    }
    let tau2 = tau * tau;
    let p = within_fraction(a, b, tau2);
    let r = within_fraction(b, a, tau2);
    if p + r == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * p * r / (p + r))
}

fn directional_mean(from: &PointCloud, to: &PointCloud, truncation: Option<f64>) -> f64 {
    let tree = KdTree::build(&to.positions);
    let n = from.len();
    let sum = par::sum_indexed(n, par::DEFAULT_CHUNK, |i| {
        let (_, d2) = tree.nearest(&from.positions[i]);
        let d = d2.sqrt();
        match truncation {
            Some(t) => d.min(t),
            None => d,
        }
    });
    sum / n as f64
}

fn within_fraction(from: &PointCloud, to: &PointCloud, tau2: f64) -> f64 {
    let tree = KdTree::build(&to.positions);
    let n = from.len();
    let count = par::sum_indexed(n, par::DEFAULT_CHUNK, |i| {
        let (_, d2) = tree.nearest(&from.positions[i]);
        if d2 <= tau2 {
            1.0
        } else {
            0.0
        }
    });
    count / n as f64
}

/// O(N*M) reference implementations used as oracles for the accelerated
/// metrics. Kept independent of [`KdTree`] on purpose.
pub mod brute {
    use super::*;

    pub fn chamfer(a: &PointCloud, b: &PointCloud, truncation: Option<f64>) -> Result<f64> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::EmptyCloud);
        }
        Ok(0.5 * (mean_nn(a, b, truncation) + mean_nn(b, a, truncation)))
    }

    pub fn fscore(a: &PointCloud, b: &PointCloud, tau: f64) -> Result<f64> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let p = frac_within(a, b, tau);
        let r = frac_within(b, a, tau);
        if p + r == 0.0 {
            return Ok(0.0);
        }
        Ok(2.0 * p * r / (p + r))
    }

    fn mean_nn(from: &PointCloud, to: &PointCloud, truncation: Option<f64>) -> f64 {
        let mut sum = 0.0;
        for p in &from.positions {
            let mut best = f64::INFINITY;
            for q in &to.positions {
                best = best.min((p - q).norm_squared());
            }
            let d = best.sqrt();
            sum += match truncation {
                Some(t) => d.min(t),
                None => d,
            };
        }
        sum / from.len() as f64
    }

    fn frac_within(from: &PointCloud, to: &PointCloud, tau: f64) -> f64 {
        let tau2 = tau * tau;
        let hits = from
            .positions
            .iter()
            .filter(|p| to.positions.iter().any(|q| (*p - q).norm_squared() <= tau2))
            .count();
        hits as f64 / from.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;

    fn cloud(points: &[[f64; 3]]) -> PointCloud {
        PointCloud::new(points.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect())
    }

    #[test]
    fn chamfer_identity_is_zero() {
        let a = cloud(&[[0.0, 0.0, 0.0], [0.5, 0.25, -0.125], [1.0, 2.0, 3.0]]);
        assert_eq!(chamfer(&a, &a, None).unwrap(), 0.0);
    }

    #[test]
    fn chamfer_unit_offset() {
        let a = cloud(&[[0.0, 0.0, 0.0]]);
        let b = cloud(&[[1.0, 0.0, 0.0]]);
        assert!((chamfer(&a, &b, None).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn chamfer_truncation_clamps() {
        let a = cloud(&[[0.0, 0.0, 0.0]]);
        let b = cloud(&[[3.0, 0.0, 0.0]]);
        assert!((chamfer(&a, &b, Some(1.0)).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn chamfer_symmetric() {
        use rand::Rng;
        let mut r = crate::rng::rng(5);
        let a = PointCloud::new((0..40).map(|_| Vec3::new(r.gen(), r.gen(), r.gen())).collect());
        let b = PointCloud::new((0..60).map(|_| Vec3::new(r.gen(), r.gen(), r.gen())).collect());
        assert_eq!(chamfer(&a, &b, None).unwrap(), chamfer(&b, &a, None).unwrap());
    }

    #[test]
    fn fscore_identity_is_one() {
        let a = cloud(&[[0.0, 0.0, 0.0], [1.0, 0.5, 0.25]]);
        assert_eq!(fscore(&a, &a, 0.05).unwrap(), 1.0);
    }

    #[test]
    fn fscore_all_misses_is_zero() {
        let a = cloud(&[[0.0, 0.0, 0.0]]);
        let b = cloud(&[[2.0, 0.0, 0.0]]);
        assert_eq!(fscore(&a, &b, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn fscore_partial_overlap() {
        // Oracle by hand: P = 1/2, R = 1, F = 2*(0.5*1)/(0.5+1) = 2/3.
        let a = cloud(&[[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]]);
        let b = cloud(&[[0.0, 0.0, 0.0]]);
        assert!((fscore(&a, &b, 1.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_cloud_errors() {
        let a = cloud(&[[0.0, 0.0, 0.0]]);
        let e = PointCloud::new(vec![]);
        assert!(chamfer(&a, &e, None).is_err());
        assert!(fscore(&e, &a, 0.1).is_err());
    }

    #[test]
    fn accelerated_matches_brute_force() {
        use rand::Rng;
        let mut r = crate::rng::rng(17);
        for _ in 0..20 {
            let na = r.gen_range(1..200);
            let nb = r.gen_range(1..200);
            let a = PointCloud::new((0..na).map(|_| Vec3::new(r.gen(), r.gen(), r.gen())).collect());
            let b = PointCloud::new((0..nb).map(|_| Vec3::new(r.gen(), r.gen(), r.gen())).collect());
            let fast = chamfer(&a, &b, None).unwrap();
            let slow = brute::chamfer(&a, &b, None).unwrap();
            assert!((fast - slow).abs() <= 1e-9 * slow.max(1e-30), "{fast} vs {slow}");
            let ff = fscore(&a, &b, 0.3).unwrap();
            let fs = brute::fscore(&a, &b, 0.3).unwrap();
            assert!((ff - fs).abs() <= 1e-12);
        }
    }
}
