// Scratch probe: ablation-suite runtime and Chamfer ranking at mini scale.
use shapegen4d_core::data::asset::{gen_asset, Warp, WarpFamily};
use shapegen4d_core::data::normalize_sequence;
use shapegen4d_core::dit::DitConfig;
use shapegen4d_core::eval::{run_ablation_suite, AblationOptions, EvalConfig};
use shapegen4d_core::vae::{build_vae_sample, train_vae, ShapeVae, VaeConfig};

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

fn assets(count: usize, frames: usize, seed0: u64) -> Vec<shapegen4d_core::data::asset::AnimatedAsset> {
    let families = [
        WarpFamily::BendCylinder,
        WarpFamily::PulseSphere,
        WarpFamily::TwistBox,
    ];
    (0..count)
        .map(|i| {
            let mut rng = shapegen4d_core::rng::stream(seed0 + i as u64, 0);
            let warp = friendly(families[i % families.len()], &mut rng);
            normalize_sequence(&gen_asset(warp, frames, seed0 + i as u64).unwrap()).unwrap()
        })
        .collect()
}

fn main() {
    let t0 = std::time::Instant::now();
    let vae_steps: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1500);
    let temporal_steps: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(600);

    let train = assets(12, 8, 3000);
    let val = assets(4, 8, 9000);
    println!("[{:?}] assets built", t0.elapsed());

    // Quick VAE on the training frames.
    let config = VaeConfig::mini();
    let dense = shapegen4d_core::vae::default_dense_points(&config);
    let mut samples = Vec::new();
    for (i, a) in train.iter().enumerate() {
        for t in [1usize, 4, 8] {
            samples.push(build_vae_sample(a.watertight_frame(t), &config, dense, 3072, i as u64 * 8 + t as u64).unwrap());
        }
    }
    let mut vae = ShapeVae::new(config).unwrap();
    train_vae(&mut vae, &samples, vae_steps, 288, |s, l| {
        if s % 300 == 0 {
            println!("[{:?}] vae step {s} loss {l:.5}", t0.elapsed());
        }
    })
    .unwrap();
    println!("[{:?}] vae trained", t0.elapsed());

    let mut dit_config = DitConfig::mini();
    dit_config.latent_count = vae.config.latent_count;
    dit_config.latent_dim = vae.config.latent_dim;
    let opts = AblationOptions {
        base_steps: 600,
        temporal_steps,
        sample_steps: 8,
        decode_resolution: 24,
        eval: EvalConfig {
            chamfer_points: 1024,
            fscore_tau: 0.05,
            iou_resolution: 24,
            seed: 0,
        },
        seed: 0,
    };
    let table = run_ablation_suite(&vae, &train, &val, &dit_config, &opts, |msg| {
        println!("[{:?}] {msg}", t0.elapsed());
    })
    .unwrap();
    println!("[{:?}] table:", t0.elapsed());
    for row in &table.rows {
        println!(
            "  {:<18} chamfer {:.4} iou {:.4} fscore {:.4}",
            row.name, row.chamfer, row.iou, row.fscore
        );
    }
}
