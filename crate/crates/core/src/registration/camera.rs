//! Camera pose estimation against a reference silhouette: uniform candidate
//! sampling ranked by silhouette IoU, particle-swarm refinement, and
//! mask-based coordinate descent.

use rand::Rng as _;

use crate::data::camera::CameraPose6;
use crate::data::silhouette::{render_silhouette, SilhouetteImage};
use crate::geom::{TriMesh, Vec3};
use crate::par;
use crate::{Error, Result};

/// Search ranges for candidate sampling and PSO bounds.
#[derive(Debug, Clone)]
pub struct CameraSearchSpace {
    pub yaw: (f64, f64),
    pub pitch: (f64, f64),
    pub radius: (f64, f64),
    pub lookat_bound: f64,
}

impl CameraSearchSpace {
    /// Full orbit around a mesh: radius between 1.5x and 3x the bounding
    /// sphere, pitch within +-60 degrees.
    pub fn around(mesh: &TriMesh) -> Self {
        let (lo, hi) = mesh.bbox();
        let bound = ((hi - lo).norm() * 0.5).max(1e-3);
        CameraSearchSpace {
            yaw: (0.0, 2.0 * std::f64::consts::PI),
            pitch: (-1.0, 1.0),
            radius: (bound * 1.5, bound * 3.0),
            lookat_bound: 0.25,
        }
    }

    /// Collapsed radius/pitch ranges (useful for symmetric objects).
    pub fn fixed_orbit(mesh: &TriMesh, radius: f64, pitch: f64) -> Self {
        let mut s = Self::around(mesh);
        s.radius = (radius, radius);
        s.pitch = (pitch, pitch);
        s
    }

    fn sample(&self, center: Vec3, rng: &mut crate::rng::Rng) -> CameraPose6 {
        let range = |lo: f64, hi: f64, rng: &mut crate::rng::Rng| {
            if hi > lo {
                rng.gen_range(lo..hi)
            } else {
                lo
            }
        };
        CameraPose6 {
            yaw: range(self.yaw.0, self.yaw.1, rng),
            pitch: range(self.pitch.0, self.pitch.1, rng),
            radius: range(self.radius.0, self.radius.1, rng),
            lookat: [center.x, center.y, center.z],
        }
    }

    fn clamp(&self, mut pose: CameraPose6) -> CameraPose6 {
        pose.pitch = pose.pitch.clamp(-1.45, 1.45);
        pose.radius = pose.radius.clamp(self.radius.0 * 0.75, self.radius.1 * 1.5);
        for c in pose.lookat.iter_mut() {
            *c = c.clamp(-self.lookat_bound, self.lookat_bound);
        }
        pose
    }
}

/// Soft-IoU score of a rendered view against the reference mask; the camera
/// similarity measure used throughout pose search.
pub fn silhouette_score(mesh: &TriMesh, pose: &CameraPose6, reference: &SilhouetteImage) -> f64 {
    match render_silhouette(mesh, pose, reference.resolution) {
        Ok(img) => img.soft_iou(reference),
        Err(_) => 0.0,
    }
}

/// Samples `m_samples` poses uniformly over the search space and returns the
/// `n_keep` best by silhouette IoU, sorted by descending score.
pub fn candidate_cameras(
    mesh: &TriMesh,
    reference: &SilhouetteImage,
    space: &CameraSearchSpace,
    m_samples: usize,
    n_keep: usize,
    seed: u64,
) -> Result<Vec<(CameraPose6, f64)>> {
    if n_keep > m_samples {
        return Err(Error::invalid("n_keep exceeds m_samples"));
    }
    let (lo, hi) = mesh.bbox();
    let center = (lo + hi) * 0.5;
    let mut rng = crate::rng::stream(seed, 0x63616d);
    let poses: Vec<CameraPose6> = (0..m_samples).map(|_| space.sample(center, &mut rng)).collect();
    let scores = par::map_indexed(poses.len(), |i| silhouette_score(mesh, &poses[i], reference));
    let mut ranked: Vec<(CameraPose6, f64)> = poses.into_iter().zip(scores).collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    ranked.truncate(n_keep);
    Ok(ranked)
}

#[derive(Debug, Clone)]
pub struct PsoConfig {
    pub swarm_size: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub seed: u64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        PsoConfig {
            swarm_size: 64,
            iterations: 40,
            inertia: 0.7,
            cognitive: 1.5,
            social: 1.5,
            seed: 0,
        }
    }
}

fn to_vec6(p: &CameraPose6) -> [f64; 6] {
    [p.yaw, p.pitch, p.radius, p.lookat[0], p.lookat[1], p.lookat[2]]
}

fn from_vec6(v: [f64; 6]) -> CameraPose6 {
    CameraPose6 {
        yaw: v[0],
        pitch: v[1],
        radius: v[2],
        lookat: [v[3], v[4], v[5]],
    }
}

/// Global-best PSO over the six camera parameters, maximizing silhouette
/// IoU. Particles seed from the candidates (first ones exactly, the rest
/// perturbed). The returned score never falls below the best initial score.
pub fn pso_camera(
    mesh: &TriMesh,
    reference: &SilhouetteImage,
    init_candidates: &[CameraPose6],
    space: &CameraSearchSpace,
    config: &PsoConfig,
) -> Result<(CameraPose6, f64)> {
    if init_candidates.is_empty() {
        return Err(Error::invalid("pso needs at least one initial candidate"));
    }
    let mut rng = crate::rng::stream(config.seed, 0x70736f);
    let n = config.swarm_size.max(init_candidates.len());
    let sigma = [0.15, 0.08, 0.05, 0.02, 0.02, 0.02];
    let mut positions: Vec<[f64; 6]> = Vec::with_capacity(n);
    for i in 0..n {
        let base = to_vec6(&init_candidates[i % init_candidates.len()]);
        let jittered = if i < init_candidates.len() {
            base
        } else {
            let mut v = base;
            for (x, s) in v.iter_mut().zip(&sigma) {
                *x += rng.gen_range(-1.0..1.0) * s * 2.0;
            }
            to_vec6(&space.clamp(from_vec6(v)))
        };
        positions.push(jittered);
    }
    let mut velocities = vec![[0.0f64; 6]; n];
    let eval = |poses: &[[f64; 6]]| -> Vec<f64> {
        par::map_indexed(poses.len(), |i| {
            silhouette_score(mesh, &from_vec6(poses[i]), reference)
        })
    };
    let mut scores = eval(&positions);
    let mut pbest = positions.clone();
    let mut pbest_score = scores.clone();
    let mut gbest_idx = argmax(&scores);
    let mut gbest = positions[gbest_idx];
    let mut gbest_score = scores[gbest_idx];
    for _ in 0..config.iterations {
        for i in 0..n {
            for d in 0..6 {
                let r1: f64 = rng.gen();
                let r2: f64 = rng.gen();
                velocities[i][d] = config.inertia * velocities[i][d]
                    + config.cognitive * r1 * (pbest[i][d] - positions[i][d])
                    + config.social * r2 * (gbest[d] - positions[i][d]);
                // Velocity clamp keeps particles in a useful band.
                let vmax = sigma[d] * 4.0;
                velocities[i][d] = velocities[i][d].clamp(-vmax, vmax);
                positions[i][d] += velocities[i][d];
            }
            positions[i] = to_vec6(&space.clamp(from_vec6(positions[i])));
        }
        scores = eval(&positions);
        for i in 0..n {
            if scores[i] > pbest_score[i] {
                pbest_score[i] = scores[i];
                pbest[i] = positions[i];
            }
        }
        gbest_idx = argmax(&pbest_score);
        if pbest_score[gbest_idx] > gbest_score {
            gbest_score = pbest_score[gbest_idx];
            gbest = pbest[gbest_idx];
        }
    }
    Ok((from_vec6(gbest), gbest_score))
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Mask-based refinement: minimizes `1 - soft_iou(render(mesh, pose), ref)`
/// by coordinate descent with central finite differences. Non-improving
/// steps are rejected with backtracking, so the objective never increases.
pub fn mask_refine(
    camera: &CameraPose6,
    mesh: &TriMesh,
    reference: &SilhouetteImage,
    step: f64,
    iters: usize,
) -> CameraPose6 {
    let objective =
        |pose: &CameraPose6| -> f64 { 1.0 - silhouette_score(mesh, pose, reference) };
    let h = [0.01, 0.01, 0.005, 0.004, 0.004, 0.004];
    let mut x = to_vec6(camera);
    let mut fx = objective(&from_vec6(x));
    // Per-parameter adaptive step scales.
    let mut scales = [step; 6];
    for _ in 0..iters {
        let mut improved = false;
        for d in 0..6 {
            let mut plus = x;
            plus[d] += h[d];
            let mut minus = x;
            minus[d] -= h[d];
            let g = (objective(&from_vec6(plus)) - objective(&from_vec6(minus))) / (2.0 * h[d]);
            if g.abs() < 1e-12 {
                continue;
            }
            let dir = -g.signum();
            let mut trial_scale = scales[d];
            for _ in 0..4 {
                let mut trial = x;
                trial[d] += dir * trial_scale * h[d] * 10.0;
                let ft = objective(&from_vec6(trial));
                if ft < fx {
                    x = trial;
                    fx = ft;
                    scales[d] = (trial_scale * 1.5).min(step * 8.0);
                    improved = true;
                    break;
                }
                trial_scale *= 0.5;
            }
            if !improved {
                scales[d] = (scales[d] * 0.5).max(step * 0.05);
            }
        }
        if !improved {
            break;
        }
    }
    from_vec6(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::asset::{gen_asset, Warp, WarpFamily};
    use crate::data::normalize_sequence;
    use crate::geom::mesh::icosphere;

    fn distinctive_mesh() -> TriMesh {
        // A bent cylinder has a unique silhouette from most angles.
        let asset = normalize_sequence(
            &gen_asset(Warp::default_for(WarpFamily::BendCylinder), 4, 5).unwrap(),
        )
        .unwrap();
        asset.watertight_frame(4).clone()
    }

    fn great_circle_deg(a: &CameraPose6, b: &CameraPose6) -> f64 {
        let d = |p: &CameraPose6| {
            Vec3::new(
                p.pitch.cos() * p.yaw.sin(),
                p.pitch.sin(),
                p.pitch.cos() * p.yaw.cos(),
            )
        };
        d(a).dot(&d(b)).clamp(-1.0, 1.0).acos().to_degrees()
    }

    #[test]
    fn candidates_find_true_direction() {
        let mesh = distinctive_mesh();
        let truth = CameraPose6::new(2.1, 0.4, 2.0, Vec3::zeros()).unwrap();
        let reference = render_silhouette(&mesh, &truth, 48).unwrap();
        let mut space = CameraSearchSpace::around(&mesh);
        space.radius = (2.0, 2.0);
        let top = candidate_cameras(&mesh, &reference, &space, 512, 8, 3).unwrap();
        assert_eq!(top.len(), 8);
        let best = &top[0].0;
        assert!(
            great_circle_deg(best, &truth) < 15.0,
            "best candidate {:.1} degrees off",
            great_circle_deg(best, &truth)
        );
        // Scores sorted descending.
        for w in top.windows(2) {
            assert!(w[0].1 >= w[1].1);
        }
    }

    #[test]
    fn rotationally_symmetric_mesh_scores_equal() {
        // A 32-segment cylinder is exactly invariant under yaw steps of
        // 2*pi/32, so cameras at those yaws must score identically.
        let cyl = crate::geom::mesh::cylinder(Vec3::zeros(), 0.25, 0.3, 32, 4);
        let truth = CameraPose6::new(0.0, 0.3, 2.0, Vec3::zeros()).unwrap();
        let reference = render_silhouette(&cyl, &truth, 48).unwrap();
        let scores: Vec<f64> = (0..32)
            .map(|k| {
                let pose = CameraPose6 {
                    yaw: 2.0 * std::f64::consts::PI * k as f64 / 32.0,
                    ..truth
                };
                silhouette_score(&cyl, &pose, &reference)
            })
            .collect();
        let smin = scores.iter().cloned().fold(f64::INFINITY, f64::min);
        let smax = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(smax - smin < 1e-6, "symmetric scores spread {}", smax - smin);
    }

    #[test]
    fn sphere_candidates_score_nearly_equal() {
        // A tessellated sphere is only approximately symmetric; the spread
        // is bounded by the faceting error.
        let sphere = icosphere(Vec3::zeros(), 0.35, 4);
        let truth = CameraPose6::new(0.0, 0.0, 2.0, Vec3::zeros()).unwrap();
        let reference = render_silhouette(&sphere, &truth, 48).unwrap();
        let space = CameraSearchSpace::fixed_orbit(&sphere, 2.0, 0.0);
        let top = candidate_cameras(&sphere, &reference, &space, 64, 64, 1).unwrap();
        let smin = top.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        let smax = top.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
        assert!(smax - smin < 5e-3, "sphere scores spread {}", smax - smin);
    }

    #[test]
    fn keep_all_returns_sorted_all() {
        let mesh = distinctive_mesh();
        let truth = CameraPose6::new(1.0, 0.2, 2.0, Vec3::zeros()).unwrap();
        let reference = render_silhouette(&mesh, &truth, 32).unwrap();
        let space = CameraSearchSpace::around(&mesh);
        let all = candidate_cameras(&mesh, &reference, &space, 32, 32, 0).unwrap();
        assert_eq!(all.len(), 32);
        assert!(candidate_cameras(&mesh, &reference, &space, 8, 9, 0).is_err());
    }

    #[test]
    fn pso_improves_on_best_candidate_and_recovers_pose() {
        let mesh = distinctive_mesh();
        let truth = CameraPose6::new(2.3, 0.3, 2.1, Vec3::zeros()).unwrap();
        let reference = render_silhouette(&mesh, &truth, 48).unwrap();
        let mut space = CameraSearchSpace::around(&mesh);
        space.radius = (2.1, 2.1);
        let top = candidate_cameras(&mesh, &reference, &space, 256, 6, 7).unwrap();
        let best_init = top[0].1;
        let poses: Vec<CameraPose6> = top.iter().map(|c| c.0).collect();
        let config = PsoConfig {
            swarm_size: 48,
            iterations: 30,
            seed: 11,
            ..Default::default()
        };
        let (found, score) = pso_camera(&mesh, &reference, &poses, &space, &config).unwrap();
        assert!(score >= best_init, "pso regressed: {score} < {best_init}");
        assert!(
            (found.yaw - truth.yaw).abs().to_degrees() < 2.0
                && (found.pitch - truth.pitch).abs().to_degrees() < 2.0,
            "recovered yaw/pitch off: {:.3}/{:.3} vs {:.3}/{:.3}",
            found.yaw,
            found.pitch,
            truth.yaw,
            truth.pitch
        );
    }

    #[test]
    fn pso_zero_iterations_returns_best_init() {
        let mesh = distinctive_mesh();
        let truth = CameraPose6::new(0.5, 0.1, 2.0, Vec3::zeros()).unwrap();
        let reference = render_silhouette(&mesh, &truth, 32).unwrap();
        let space = CameraSearchSpace::around(&mesh);
        let inits = vec![
            CameraPose6::new(0.4, 0.1, 2.0, Vec3::zeros()).unwrap(),
            CameraPose6::new(3.0, -0.5, 2.5, Vec3::zeros()).unwrap(),
        ];
        let config = PsoConfig {
            swarm_size: 8,
            iterations: 0,
            seed: 2,
            ..Default::default()
        };
        let (found, score) = pso_camera(&mesh, &reference, &inits, &space, &config).unwrap();
        let s0 = silhouette_score(&mesh, &inits[0], &reference);
        assert!((score - s0).abs() < 1e-12);
        assert!((found.yaw - 0.4).abs() < 1e-12);
        assert!(pso_camera(&mesh, &reference, &[], &space, &config).is_err());
    }

    #[test]
    fn mask_refine_is_stationary_at_truth_and_improves_offsets() {
        let mesh = distinctive_mesh();
        let truth = CameraPose6::new(1.2, 0.25, 2.0, Vec3::zeros()).unwrap();
        let reference = render_silhouette(&mesh, &truth, 48).unwrap();
        // At the optimum: no move.
        let refined = mask_refine(&truth, &mesh, &reference, 0.5, 3);
        assert!((refined.yaw - truth.yaw).abs() < 0.02);
        // 5 degrees off in yaw: error shrinks.
        let off = CameraPose6 {
            yaw: truth.yaw + 5.0f64.to_radians(),
            ..truth
        };
        let refined = mask_refine(&off, &mesh, &reference, 0.5, 25);
        let before = (off.yaw - truth.yaw).abs();
        let after = (refined.yaw - truth.yaw).abs();
        assert!(after < before, "yaw error grew: {after} vs {before}");
        // Zero iterations: identity.
        let same = mask_refine(&off, &mesh, &reference, 0.5, 0);
        assert_eq!(same, off);
    }
}
