use shapegen4d_core::data::asset::{gen_asset, Warp, WarpFamily};
use shapegen4d_core::data::normalize_sequence;
use shapegen4d_core::data::camera::CameraPose6;
use shapegen4d_core::data::silhouette::render_silhouette;
use shapegen4d_core::geom::Vec3;
use shapegen4d_core::registration::camera::{mask_refine, silhouette_score};

fn main() {
    let asset = normalize_sequence(&gen_asset(Warp::default_for(WarpFamily::BendCylinder), 4, 5).unwrap()).unwrap();
    let mesh = asset.watertight_frame(4).clone();
    let truth = CameraPose6::new(1.2, 0.25, 2.0, Vec3::zeros()).unwrap();
    let reference = render_silhouette(&mesh, &truth, 48).unwrap();
    for dy in [-0.10, -0.087, -0.05, -0.02, -0.01, 0.0, 0.01, 0.02, 0.05, 0.087, 0.10] {
        let pose = CameraPose6 { yaw: truth.yaw + dy, ..truth };
        println!("dyaw {dy:+.3}: obj {:.6}", 1.0 - silhouette_score(&mesh, &pose, &reference));
    }
    // Replicate the refine loop with prints.
    let off = CameraPose6 { yaw: truth.yaw + 0.087, ..truth };
    let objective = |p: &CameraPose6| 1.0 - silhouette_score(&mesh, p, &reference);
    let h = [0.01, 0.01, 0.005, 0.004, 0.004, 0.004];
    let x = [off.yaw, off.pitch, off.radius, off.lookat[0], off.lookat[1], off.lookat[2]];
    let make = |v: [f64; 6]| CameraPose6 { yaw: v[0], pitch: v[1], radius: v[2], lookat: [v[3], v[4], v[5]] };
    let fx = objective(&make(x));
    println!("f(start) = {fx:.6}");
    let mut grad = [0.0; 6];
    for d in 0..6 {
        let mut plus = x; plus[d] += h[d];
        let mut minus = x; minus[d] -= h[d];
        grad[d] = (objective(&make(plus)) - objective(&make(minus))) / (2.0 * h[d]);
    }
    println!("grad = {grad:?}");
    let norm: f64 = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    println!("norm = {norm}");
    let mut trial_scale: f64 = 0.5;
    for bt in 0..5 {
        let mut trial = x;
        for d in 0..6 { trial[d] -= trial_scale * grad[d] / norm * h[d] * 10.0; }
        println!("bt {bt} scale {trial_scale}: dyaw_step {:+.4} f {:.6}", trial[0]-x[0], objective(&make(trial)));
        trial_scale *= 0.5;
    }

    let off2 = CameraPose6 { yaw: truth.yaw + 5.0f64.to_radians(), ..truth };
    let refined = mask_refine(&off2, &mesh, &reference, 0.5, 25);
    println!("refined dyaw {:+.5} dpitch {:+.5} dradius {:+.5} lookat {:?}",
        refined.yaw - truth.yaw, refined.pitch - truth.pitch, refined.radius - truth.radius, refined.lookat);
    println!("obj(off2) {:.6} obj(refined) {:.6}", 1.0 - silhouette_score(&mesh, &off2, &reference), 1.0 - silhouette_score(&mesh, &refined, &reference));
}
