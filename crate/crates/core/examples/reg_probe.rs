use shapegen4d_core::data::asset::{gen_asset, Warp};
use shapegen4d_core::data::normalize_sequence;
use shapegen4d_core::geom::{chamfer, sample_surface, Vec3};
use shapegen4d_core::registration::{grid_search_pose, icp_from, rigid_register_pair, Similarity3, REG_TRUNCATION};

fn main() {
    let asset = normalize_sequence(
        &gen_asset(
            Warp::BendCylinder { radius: 0.15, half_height: 0.35, max_bend: 0.7, drift: [0.0; 3] },
            4, 0,
        ).unwrap(),
    ).unwrap();
    let src = asset.frame(4).clone();
    let truth = Similarity3::from_axis_angle(Vec3::new(0.0, 1.0, 0.15), 0.4)
        .with_scale(1.1)
        .compose(&Similarity3::from_translation(Vec3::new(0.05, 0.0, -0.04)));
    let dst = truth.apply_mesh(&src);

    let src_s = sample_surface(&src, 2048, 11).unwrap();
    let dst_s = sample_surface(&dst, 2048, 12).unwrap();
    let scale_grid: Vec<f64> = (0..=14).map(|i| 0.7 + 0.05 * i as f64).collect();
    let coarse = grid_search_pose(&src_s, &dst_s, 64, &scale_grid, REG_TRUNCATION).unwrap();
    println!("coarse rot_err {:.3} deg scale {:.3} chamfer {:.5}",
        coarse.rotation_error(&truth).to_degrees(), coarse.scale,
        chamfer(&coarse.apply_cloud(&src_s), &dst_s, Some(0.1)).unwrap());
    let refined = icp_from(&src_s, &dst_s, coarse, 40, true, 1e-9).unwrap();
    println!("icp    rot_err {:.3} deg scale {:.3} chamfer {:.5}",
        refined.rotation_error(&truth).to_degrees(), refined.scale,
        chamfer(&refined.apply_cloud(&src_s), &dst_s, Some(0.1)).unwrap());
    let full = rigid_register_pair(&src, &dst).unwrap();
    println!("pair   rot_err {:.3} deg scale {:.3} chamfer {:.5}",
        full.rotation_error(&truth).to_degrees(), full.scale,
        chamfer(&full.apply_cloud(&src_s), &dst_s, Some(0.1)).unwrap());
    // Surface-chamfer landscape between found and truth.
    let src_grid = shapegen4d_core::geom::TriGrid::build(&src);
    let dst_grid = shapegen4d_core::geom::TriGrid::build(&dst);
    let score = |t: &Similarity3| {
        let fwd: f64 = src_s.positions.iter().map(|&p| dst_grid.closest_point(t.apply(p)).0).sum::<f64>() / src_s.len() as f64;
        let inv = t.inverse();
        let bwd: f64 = dst_s.positions.iter().map(|&p| src_grid.closest_point(inv.apply(p)).0 * t.scale).sum::<f64>() / dst_s.len() as f64;
        0.5 * (fwd + bwd)
    };
    println!("score(found) = {:.6}  score(truth) = {:.6}", score(&full), score(&truth));
}
