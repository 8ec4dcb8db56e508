// Scratch probe: mini-VAE training speed and held-out IoU.
use shapegen4d_core::data::asset::{gen_asset, Warp, WarpFamily};
use shapegen4d_core::data::normalize_sequence;
use shapegen4d_core::vae::{build_vae_sample, reconstruction_iou, train_vae, ShapeVae, VaeConfig};

fn friendly(family: WarpFamily, rng: &mut shapegen4d_core::rng::Rng) -> Warp {
    use rand::Rng as _;
    match family {
        WarpFamily::BendCylinder => Warp::BendCylinder {
            radius: rng.gen_range(0.13..0.2),
            half_height: rng.gen_range(0.3..0.4),
            max_bend: rng.gen_range(0.5..1.2),
            drift: [0.0; 3],
        },
        other => Warp::sampled(other, rng),
    }
}

fn main() {
    let t0 = std::time::Instant::now();
    let mut config = VaeConfig::mini();
    if let Some(lr) = std::env::args().nth(2).and_then(|s| s.parse::<f64>().ok()) { config.learning_rate = lr; }
    // Training shapes: frames of solid warped assets, varied params.
    let mut meshes = Vec::new();
    for seed in 0..30u64 {
        let mut rng = shapegen4d_core::rng::stream(1000 + seed, 0);
        for family in [WarpFamily::PulseSphere, WarpFamily::BendCylinder, WarpFamily::TwistBox] {
            let warp = friendly(family, &mut rng);
            let asset = normalize_sequence(&gen_asset(warp, 4, seed).unwrap()).unwrap();
            for t in [1usize, 3] {
                meshes.push(asset.watertight_frame(t).clone());
                if matches!(family, WarpFamily::BendCylinder) {
                    meshes.push(asset.watertight_frame(t + 1).clone());
                }
            }
        }
    }
    println!("[{:?}] {} training meshes", t0.elapsed(), meshes.len());
    let dense = shapegen4d_core::vae::default_dense_points(&config);
    let mut samples = Vec::new();
    for (i, m) in meshes.iter().enumerate() {
        for aug in 0..2u64 {
            samples.push(build_vae_sample(m, &config, dense, 3072, i as u64 * 2 + aug).unwrap());
        }
    }
    println!("[{:?}] samples built", t0.elapsed());
    let mut vae = ShapeVae::new(config.clone()).unwrap();
    let steps: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1500);
    train_vae(&mut vae, &samples, steps, 288, |s, l| {
        if s % 200 == 0 { println!("[{:?}] step {s} loss {l:.5}", t0.elapsed()); }
    })
    .unwrap();
    println!("[{:?}] trained {steps} steps", t0.elapsed());
    // Held-out: new seeds.
    let mut ious = Vec::new();
    for seed in 100..108u64 {
        let mut rng = shapegen4d_core::rng::stream(2000 + seed, 0);
        for family in [WarpFamily::PulseSphere, WarpFamily::BendCylinder] {
            let warp = friendly(family, &mut rng);
            let asset = normalize_sequence(&gen_asset(warp, 2, seed).unwrap()).unwrap();
            let mesh = asset.watertight_frame(1);
            let iou = reconstruction_iou(&vae, mesh, 64, seed).unwrap();
            let lat = vae.encode_mesh(mesh, seed).unwrap();
            let grid = vae.decode_grid(&lat.mean, 64).unwrap();
            let pred_occ = grid.values.iter().filter(|&&v| v < 0.0).count();
            let gt = shapegen4d_core::geom::voxelize_occupancy(mesh, 64).unwrap();
            println!("[{:?}] {family} seed {seed}: IoU {iou:.4} pred_occ {pred_occ} gt_occ {}", t0.elapsed(), gt.occupied_count());
            ious.push(iou);
        }
    }
    let mean = ious.iter().sum::<f64>() / ious.len() as f64;
    println!("[{:?}] mean held-out IoU {mean:.4} min {:.4}", t0.elapsed(), ious.iter().cloned().fold(1.0, f64::min));
    // Train-set IoU for the generalization-gap read.
    let mut tious = Vec::new();
    for (i, m) in meshes.iter().take(6).enumerate() {
        tious.push(reconstruction_iou(&vae, m, 64, 9000 + i as u64).unwrap());
    }
    println!("[{:?}] train-set IoU sample: {:?}", t0.elapsed(), tious.iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>());
}
