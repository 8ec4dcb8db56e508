//! Global pose search: azimuth/scale grid search, ICP, and the sequence
//! protocol (one global similarity plus per-frame translations).

use super::similarity::{umeyama, Similarity3};
use crate::geom::{chamfer, KdTree, PointCloud, Vec3};
use crate::par;
use crate::{Error, Result};

/// Truncated-Chamfer truncation used by registration.
pub const REG_TRUNCATION: f64 = 0.1;

/// Default azimuth grid resolution.
pub const AZIMUTH_STEPS: usize = 64;

/// Default scale grid 0.7..=1.4 step 0.05.
pub fn default_scale_grid() -> Vec<f64> {
    (0..=14).map(|i| 0.7 + 0.05 * i as f64).collect()
}

/// Exhaustive search over yaw rotations x scales with centroid-aligned
/// translation, scored by truncated Chamfer distance.
pub fn grid_search_pose(
    pred: &PointCloud,
    target: &PointCloud,
    azimuth_steps: usize,
    scale_grid: &[f64],
    truncation: f64,
) -> Result<Similarity3> {
    if pred.is_empty() || target.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if azimuth_steps == 0 || scale_grid.is_empty() {
        return Err(Error::invalid("empty search grid"));
    }
    let c_pred = pred.centroid();
    let c_target = target.centroid();
    let candidates: Vec<Similarity3> = (0..azimuth_steps)
        .flat_map(|i| {
            let yaw = 2.0 * std::f64::consts::PI * i as f64 / azimuth_steps as f64;
            scale_grid.iter().map(move |&s| {
                let mut t = Similarity3::from_yaw(yaw).with_scale(s);
                t.translation = c_target - s * (t.rotation * c_pred);
                t
            })
        })
        .collect();
    let scores = par::map_indexed(candidates.len(), |i| {
        let moved = candidates[i].apply_cloud(pred);
        chamfer(&moved, target, Some(truncation)).unwrap_or(f64::INFINITY)
    });
    let best = scores
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .unwrap();
    Ok(candidates[best])
}

/// Iterative closest point with a closed-form similarity update per
/// iteration. The update is safeguarded: a step that would increase the
/// truncated Chamfer distance is rolled back and iteration stops, so the
/// metric is non-increasing across iterations.
pub fn icp(
    src: &PointCloud,
    dst: &PointCloud,
    max_iters: usize,
    with_scale: bool,
    tol: f64,
) -> Result<Similarity3> {
    icp_from(src, dst, Similarity3::identity(), max_iters, with_scale, tol)
}

pub fn icp_from(
    src: &PointCloud,
    dst: &PointCloud,
    init: Similarity3,
    max_iters: usize,
    with_scale: bool,
    tol: f64,
) -> Result<Similarity3> {
    if src.is_empty() || dst.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if src.len() < 3 || dst.len() < 3 {
        return Err(Error::Degenerate);
    }
    let tree = KdTree::build(&dst.positions);
    // Standard correspond/solve alternation; the returned transform is the
    // best-by-truncated-Chamfer iterate, so lengthening the iteration budget
    // never worsens the metric.
    let mut current = init;
    let mut moved: Vec<_> = src.positions.iter().map(|&p| current.apply(p)).collect();
    let score = |pts: Vec<Vec3>| -> Result<f64> {
        chamfer(&PointCloud::new(pts), dst, Some(REG_TRUNCATION))
    };
    let mut best = current;
    let mut best_score = score(moved.clone())?;
    for _ in 0..max_iters {
        let matches: Vec<_> = moved
            .iter()
            .map(|p| dst.positions[tree.nearest(p).0])
            .collect();
        let candidate = umeyama(&src.positions, &matches, with_scale)?;
        let new_moved: Vec<_> = src.positions.iter().map(|&p| candidate.apply(p)).collect();
        let rms = (moved
            .iter()
            .zip(&new_moved)
            .map(|(a, b)| (a - b).norm_squared())
            .sum::<f64>()
            / moved.len() as f64)
            .sqrt();
        let new_score = score(new_moved.clone())?;
        current = candidate;
        moved = new_moved;
        if new_score <= best_score {
            best_score = new_score;
            best = current;
        }
        if rms < tol {
            break;
        }
    }
    Ok(best)
}

/// Sequence registration: one global similarity estimated on frame 1 (grid
/// search then ICP), then per-frame centroid translations. Rotation and
/// scale stay frame-constant so predicted frame-wise motion is preserved.
pub fn register_sequence(
    pred_seq: &[PointCloud],
    target_seq: &[PointCloud],
) -> Result<Vec<Similarity3>> {
    if pred_seq.len() != target_seq.len() {
        return Err(Error::FrameCountMismatch {
            expected: target_seq.len(),
            found: pred_seq.len(),
        });
    }
    if pred_seq.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let coarse = grid_search_pose(
        &pred_seq[0],
        &target_seq[0],
        AZIMUTH_STEPS,
        &default_scale_grid(),
        REG_TRUNCATION,
    )?;
    let global = icp_from(&pred_seq[0], &target_seq[0], coarse, 50, true, 1e-9)?;
    let mut out = Vec::with_capacity(pred_seq.len());
    for (pred, target) in pred_seq.iter().zip(target_seq) {
        let moved = global.apply_cloud(pred);
        let delta = target.centroid() - moved.centroid();
        out.push(Similarity3::from_translation(delta).compose(&global));
    }
    Ok(out)
}
