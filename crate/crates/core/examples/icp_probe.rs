use shapegen4d_core::data::asset::{gen_asset, Warp};
use shapegen4d_core::data::normalize_sequence;
use shapegen4d_core::geom::{sample_surface, TriGrid, Vec3};
use shapegen4d_core::registration::{grid_search_pose, icp_from, umeyama, Similarity3, REG_TRUNCATION};

fn main() {
    let asset = normalize_sequence(
        &gen_asset(Warp::BendCylinder { radius: 0.15, half_height: 0.35, max_bend: 0.7, drift: [0.0; 3] }, 4, 0).unwrap(),
    ).unwrap();
    let src = asset.frame(4).clone();
    let truth = Similarity3::from_axis_angle(Vec3::new(0.0, 1.0, 0.15), 0.4)
        .with_scale(1.1)
        .compose(&Similarity3::from_translation(Vec3::new(0.05, 0.0, -0.04)));
    let dst = truth.apply_mesh(&src);
    let src_s = sample_surface(&src, 2048, 11).unwrap();
    let dst_s = sample_surface(&dst, 2048, 12).unwrap();
    let dst_grid = TriGrid::build(&dst);
    let scale_grid: Vec<f64> = (0..=14).map(|i| 0.7 + 0.05 * i as f64).collect();
    let coarse = grid_search_pose(&src_s, &dst_s, 64, &scale_grid, REG_TRUNCATION).unwrap();
    let mut current = icp_from(&src_s, &dst_s, coarse, 20, true, 1e-9).unwrap();
    for it in 0..60 {
        let matches: Vec<Vec3> = src_s.positions.iter()
            .map(|&p| dst_grid.closest_point(current.apply(p)).1)
            .collect();
        current = umeyama(&src_s.positions, &matches, true).unwrap();
        if it % 10 == 0 || it == 59 {
            let mean_d: f64 = src_s.positions.iter().map(|&p| dst_grid.closest_point(current.apply(p)).0).sum::<f64>() / 2048.0;
            println!("iter {it}: rot_err {:.4} deg scale {:.4} mean_surf_dist {:.6}",
                current.rotation_error(&truth).to_degrees(), current.scale, mean_d);
        }
    }
}
