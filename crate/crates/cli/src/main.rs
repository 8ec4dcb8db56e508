//! Single entry point orchestrating the 4D generation pipeline with
//! reproducible, seeded runs.

mod config;
mod io_util;

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::Value;

use config::RunConfig;
use shapegen4d_core::data::asset::{gen_asset, Warp, WarpFamily};
use shapegen4d_core::data::{normalize_sequence, read_sequence, write_sequence};
use shapegen4d_core::dit::{
    build_base, insert_temporal_layers, sample_sequence, train_base, train_temporal, Ablation,
    DitConfig, NoiseMode,
};
use shapegen4d_core::eval::{
    base_dataset, conditioning_camera, conditioning_views, evaluate_sequence, run_ablation_suite,
    sequence_dataset, AblationOptions, EvalConfig,
};
use shapegen4d_core::geom::obj;
use shapegen4d_core::nn::ParamStore;
use shapegen4d_core::registration::{
    propagate_uv, register_sequence, topology_consistent_sequence, ArapParams, SimilarityRecord,
};
use shapegen4d_core::vae::{build_vae_sample, train_vae, ShapeVae, VaeConfig};

#[derive(Parser)]
#[command(
    name = "shapegen4d",
    about = "Video-conditioned 4D mesh generation pipeline",
    version
)]
struct Cli {
    /// Worker threads (0 = all cores). SHAPEGEN4D_THREADS is honored when
    /// the flag is absent; 1 forces fully serial execution.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// JSON config file with flat dotted keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one config key: --set key=value (repeatable).
    #[arg(long = "set", global = true)]
    sets: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a procedural synthetic 4D dataset.
    GenData {
        #[arg(long, default_value = "bend_cylinder,pulse_sphere,twist_box")]
        families: String,
        #[arg(long, default_value_t = 4)]
        count: usize,
        #[arg(long, default_value_t = 16)]
        frames: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train the shape VAE on dataset frames.
    TrainVae {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2000)]
        steps: usize,
        #[arg(long, default_value = "mini")]
        preset: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Encode dataset sequences into latent blobs.
    Encode {
        #[arg(long)]
        vae: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Temporally aligned (default) or per-frame independent queries.
        #[arg(long, default_value_t = true)]
        aligned: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train the per-frame base diffusion model.
    TrainBase {
        #[arg(long)]
        vae: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, default_value = "mini")]
        preset: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train the inserted spatiotemporal layers (base stays frozen).
    TrainDit {
        #[arg(long)]
        vae: PathBuf,
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, default_value = "none")]
        ablation: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sample mesh sequences conditioned on dataset silhouettes.
    Sample {
        #[arg(long)]
        vae: PathBuf,
        #[arg(long)]
        dit: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        steps: usize,
        #[arg(long, default_value_t = 3.0)]
        shift: f64,
        #[arg(long, default_value = "shared")]
        noise: String,
        #[arg(long, default_value_t = 32)]
        resolution: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// VAE round trip of one mesh: encode, decode, marching cubes.
    Reconstruct {
        #[arg(long)]
        vae: PathBuf,
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 64)]
        resolution: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Register a predicted sequence onto a reference and make it
    /// topology-consistent.
    Register {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Texture image to propagate with frame 1's UVs.
        #[arg(long)]
        texture: Option<PathBuf>,
    },
    /// Geometric evaluation of a predicted sequence against ground truth.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 128)]
        iou_resolution: usize,
        #[arg(long, default_value_t = 10000)]
        chamfer_points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train and rank the remove-one-component ablation table.
    Ablate {
        #[arg(long, default_value = "table3")]
        suite: String,
        #[arg(long)]
        vae: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        val: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 600)]
        base_steps: usize,
        #[arg(long, default_value_t = 600)]
        temporal_steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() {
    let cli = Cli::parse();
    init_threads(cli.threads);
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn init_threads(flag: usize) {
    #[cfg(feature = "parallel")]
    {
        let n = if flag > 0 {
            flag
        } else {
            std::env::var("SHAPEGEN4D_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
                .unwrap_or(0)
        };
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        if flag > 1 {
            eprintln!("[threads] built without the parallel feature; running serially");
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut config = RunConfig::load(cli.config.as_deref(), &cli.sets)?;
    match cli.command {
        Command::GenData {
            families,
            count,
            frames,
            out,
            seed,
        } => cmd_gen_data(&mut config, &families, count, frames, &out, seed),
        Command::TrainVae {
            data,
            out,
            steps,
            preset,
            seed,
        } => cmd_train_vae(&mut config, &data, &out, steps, &preset, seed),
        Command::Encode {
            vae,
            data,
            out,
            aligned,
            seed,
        } => cmd_encode(&mut config, &vae, &data, &out, aligned, seed),
        Command::TrainBase {
            vae,
            data,
            out,
            steps,
            preset,
            seed,
        } => cmd_train_base(&mut config, &vae, &data, &out, steps, &preset, seed),
        Command::TrainDit {
            vae,
            base,
            data,
            out,
            steps,
            ablation,
            seed,
        } => cmd_train_dit(&mut config, &vae, &base, &data, &out, steps, &ablation, seed),
        Command::Sample {
            vae,
            dit,
            data,
            out,
            steps,
            shift,
            noise,
            resolution,
            seed,
        } => cmd_sample(
            &mut config,
            &vae,
            &dit,
            &data,
            &out,
            steps,
            shift,
            &noise,
            resolution,
            seed,
        ),
        Command::Reconstruct {
            vae,
            mesh,
            out,
            resolution,
            seed,
        } => cmd_reconstruct(&vae, &mesh, &out, resolution, seed),
        Command::Register {
            pred,
            reference,
            out,
            texture,
        } => cmd_register(&mut config, &pred, &reference, &out, texture.as_deref()),
        Command::Evaluate {
            pred,
            gt,
            out,
            iou_resolution,
            chamfer_points,
            seed,
        } => cmd_evaluate(&pred, &gt, &out, iou_resolution, chamfer_points, seed),
        Command::Ablate {
            suite,
            vae,
            data,
            val,
            out,
            base_steps,
            temporal_steps,
            seed,
        } => cmd_ablate(
            &mut config,
            &suite,
            &vae,
            &data,
            &val,
            &out,
            base_steps,
            temporal_steps,
            seed,
        ),
    }
}

fn cmd_gen_data(
    config: &mut RunConfig,
    families: &str,
    count: usize,
    frames: usize,
    out: &PathBuf,
    seed: u64,
) -> Result<()> {
    let families: Vec<WarpFamily> = families
        .split(',')
        .map(|s| s.trim().parse().map_err(anyhow::Error::from))
        .collect::<Result<_>>()?;
    if families.is_empty() {
        bail!("at least one warp family required");
    }
    std::fs::create_dir_all(out)?;
    let mut ids = Vec::new();
    for i in 0..count {
        let family = families[i % families.len()];
        let mut rng = shapegen4d_core::rng::stream(seed, i as u64);
        let warp = Warp::sampled(family, &mut rng);
        let asset_seed = seed.wrapping_add(i as u64);
        let asset = normalize_sequence(&gen_asset(warp, frames, asset_seed)?)?;
        let camera = conditioning_camera(&asset, asset_seed)?;
        let dir = out.join(format!("asset_{i:03}"));
        write_sequence(&asset, &dir, Some(camera))?;
        eprintln!("[gen-data] wrote {} ({family})", dir.display());
        ids.push(format!("asset_{i:03}"));
    }
    std::fs::write(out.join("assets.json"), serde_json::to_string_pretty(&ids)?)?;
    config.set("gen_data.families", Value::from(families.iter().map(|f| f.to_string()).collect::<Vec<_>>()));
    config.set("gen_data.count", Value::from(count));
    config.set("gen_data.frames", Value::from(frames));
    config.set("gen_data.seed", Value::from(seed));
    config.snapshot(out, "gen-data")
}

fn load_assets(dir: &PathBuf) -> Result<Vec<shapegen4d_core::data::asset::AnimatedAsset>> {
    let ids: Vec<String> = serde_json::from_str(
        &std::fs::read_to_string(dir.join("assets.json"))
            .with_context(|| format!("{} is not a dataset directory", dir.display()))?,
    )?;
    ids.iter()
        .map(|id| read_sequence(&dir.join(id)).map_err(anyhow::Error::from))
        .collect()
}

fn vae_preset(preset: &str) -> Result<VaeConfig> {
    Ok(match preset {
        "mini" => VaeConfig::mini(),
        "desk" => VaeConfig::desk(),
        "micro" => VaeConfig::micro(),
        other => bail!("unknown vae preset '{other}' (mini|desk|micro)"),
    })
}

fn dit_preset(preset: &str) -> Result<DitConfig> {
    Ok(match preset {
        "mini" => DitConfig::mini(),
        "desk" => DitConfig::desk(),
        "micro" => DitConfig::micro(),
        other => bail!("unknown dit preset '{other}' (mini|desk|micro)"),
    })
}

fn cmd_train_vae(
    config: &mut RunConfig,
    data: &PathBuf,
    out: &PathBuf,
    steps: usize,
    preset: &str,
    seed: u64,
) -> Result<()> {
    let assets = load_assets(data)?;
    let mut vae_config = vae_preset(preset)?;
    vae_config.seed = seed;
    vae_config.learning_rate = config.get_f64("vae.learning_rate", vae_config.learning_rate);
    let dense = shapegen4d_core::vae::default_dense_points(&vae_config);
    let sup_pool = config.get_usize("vae.supervision_pool", 4096);
    let sup_per_step = config.get_usize("vae.supervision_per_step", 288);
    eprintln!("[train-vae] building samples from {} assets", assets.len());
    let mut samples = Vec::new();
    for (i, asset) in assets.iter().enumerate() {
        for t in 1..=asset.frame_count {
            samples.push(build_vae_sample(
                asset.watertight_frame(t),
                &vae_config,
                dense,
                sup_pool,
                seed ^ ((i as u64) << 16) ^ t as u64,
            )?);
        }
    }
    let mut vae = ShapeVae::new(vae_config.clone())?;
    let report = train_vae(&mut vae, &samples, steps, sup_per_step, |s, l| {
        eprintln!("[train-vae] step {s} loss {l:.5}");
    })?;
    std::fs::create_dir_all(out)?;
    vae.store.save(out)?;
    std::fs::write(out.join("vae.json"), serde_json::to_string_pretty(&vae_config)?)?;
    let mut curve = String::from("step,loss\n");
    for (s, l) in &report.curve {
        curve.push_str(&format!("{s},{l}\n"));
    }
    std::fs::write(out.join("curve.csv"), curve)?;
    config.set("vae.steps", Value::from(steps));
    config.set("vae.preset", Value::from(preset));
    config.set("vae.seed", Value::from(seed));
    config.snapshot(out, "train-vae")
}

fn load_vae(dir: &PathBuf) -> Result<ShapeVae> {
    let vae_config: VaeConfig =
        serde_json::from_str(&std::fs::read_to_string(dir.join("vae.json"))?)?;
    let mut vae = ShapeVae::new(vae_config)?;
    vae.store.load(dir)?;
    Ok(vae)
}

fn cmd_encode(
    config: &mut RunConfig,
    vae_dir: &PathBuf,
    data: &PathBuf,
    out: &PathBuf,
    aligned: bool,
    seed: u64,
) -> Result<()> {
    let vae = load_vae(vae_dir)?;
    let assets = load_assets(data)?;
    std::fs::create_dir_all(out)?;
    for (i, asset) in assets.iter().enumerate() {
        let (latents, queries) =
            shapegen4d_core::eval::dataset::encode_asset(&vae, asset, aligned, seed ^ i as u64)?;
        let dir = out.join(format!("asset_{i:03}"));
        std::fs::create_dir_all(&dir)?;
        let (t, k, d) = (latents.len(), latents[0].rows(), latents[0].cols());
        let mut flat = Vec::with_capacity(t * k * d);
        for z in &latents {
            flat.extend_from_slice(&z.data);
        }
        shapegen4d_core::blob::write_blob(&dir.join("latents.tnsr"), &[t, k, d], &flat)?;
        shapegen4d_core::align::write_queries(&dir, "queries", &queries)?;
        eprintln!("[encode] {} -> {}x{}x{}", dir.display(), t, k, d);
    }
    config.set("encode.aligned", Value::from(aligned));
    config.set("encode.seed", Value::from(seed));
    config.snapshot(out, "encode")
}

fn cmd_train_base(
    config: &mut RunConfig,
    vae_dir: &PathBuf,
    data: &PathBuf,
    out: &PathBuf,
    steps: usize,
    preset: &str,
    seed: u64,
) -> Result<()> {
    let vae = load_vae(vae_dir)?;
    let assets = load_assets(data)?;
    let mut dit_config = dit_preset(preset)?;
    dit_config.latent_count = vae.config.latent_count;
    dit_config.latent_dim = vae.config.latent_dim;
    dit_config.seed = seed;
    dit_config.learning_rate = config.get_f64("dit.learning_rate", dit_config.learning_rate);
    eprintln!("[train-base] encoding {} assets", assets.len());
    let sequences = sequence_dataset(&vae, &assets, dit_config.cond_resolution, true, seed)?;
    let frames = base_dataset(&sequences);
    let mut store = ParamStore::new();
    let base = build_base(&dit_config, &mut store)?;
    train_base(&base, &mut store, &frames, steps, |s, l| {
        eprintln!("[train-base] step {s} loss {l:.5}");
    })?;
    std::fs::create_dir_all(out)?;
    store.save(out)?;
    std::fs::write(out.join("dit.json"), serde_json::to_string_pretty(&dit_config)?)?;
    config.set("base.steps", Value::from(steps));
    config.set("base.seed", Value::from(seed));
    config.snapshot(out, "train-base")
}

#[allow(clippy::too_many_arguments)]
fn cmd_train_dit(
    config: &mut RunConfig,
    vae_dir: &PathBuf,
    base_dir: &PathBuf,
    data: &PathBuf,
    out: &PathBuf,
    steps: usize,
    ablation: &str,
    seed: u64,
) -> Result<()> {
    let vae = load_vae(vae_dir)?;
    let assets = load_assets(data)?;
    let mut dit_config: DitConfig =
        serde_json::from_str(&std::fs::read_to_string(base_dir.join("dit.json"))?)?;
    dit_config.ablation = ablation.parse::<Ablation>()?;
    let mut store = ParamStore::new();
    let base = build_base(&dit_config, &mut store)?;
    store.load(base_dir)?;
    let model = insert_temporal_layers(base, &mut store)?;
    let aligned = dit_config.ablation != Ablation::NoAlign;
    eprintln!("[train-dit] encoding sequences (aligned = {aligned})");
    let sequences = sequence_dataset(&vae, &assets, dit_config.cond_resolution, aligned, seed)?;
    train_temporal(&model, &mut store, &sequences, steps, |s, l| {
        eprintln!("[train-dit] step {s} loss {l:.5}");
    })?;
    std::fs::create_dir_all(out)?;
    store.save(out)?;
    std::fs::write(out.join("dit.json"), serde_json::to_string_pretty(&dit_config)?)?;
    config.set("dit.steps", Value::from(steps));
    config.set("dit.ablation", Value::from(ablation));
    config.set("dit.seed", Value::from(seed));
    config.snapshot(out, "train-dit")
}

fn load_dit(dir: &PathBuf) -> Result<(shapegen4d_core::dit::SpatiotemporalModel, ParamStore)> {
    let dit_config: DitConfig =
        serde_json::from_str(&std::fs::read_to_string(dir.join("dit.json"))?)?;
    let mut store = ParamStore::new();
    let base = build_base(&dit_config, &mut store)?;
    let model = insert_temporal_layers(base, &mut store)?;
    store.load(dir)?;
    Ok((model, store))
}

#[allow(clippy::too_many_arguments)]
fn cmd_sample(
    config: &mut RunConfig,
    vae_dir: &PathBuf,
    dit_dir: &PathBuf,
    data: &PathBuf,
    out: &PathBuf,
    steps: usize,
    shift: f64,
    noise: &str,
    resolution: usize,
    seed: u64,
) -> Result<()> {
    let vae = load_vae(vae_dir)?;
    let (model, store) = load_dit(dit_dir)?;
    let assets = load_assets(data)?;
    let mode: NoiseMode = noise.parse()?;
    std::fs::create_dir_all(out)?;
    for (i, asset) in assets.iter().enumerate() {
        let camera = conditioning_camera(asset, seed ^ i as u64)?;
        let views = conditioning_views(asset, &camera, model.config().cond_resolution)?;
        let view_refs: Vec<_> = views.iter().collect();
        let latents = sample_sequence(&model, &store, &view_refs, steps, seed ^ i as u64, mode, shift)?;
        let dir = out.join(format!("asset_{i:03}"));
        std::fs::create_dir_all(&dir)?;
        let (t, k, d) = (latents.len(), latents[0].rows(), latents[0].cols());
        let mut flat = Vec::with_capacity(t * k * d);
        for z in &latents {
            flat.extend_from_slice(&z.data);
        }
        shapegen4d_core::blob::write_blob(&dir.join("latents.tnsr"), &[t, k, d], &flat)?;
        for (f, z) in latents.iter().enumerate() {
            let grid = vae.decode_grid(z, resolution)?;
            let mesh = shapegen4d_core::geom::marching_cubes(&grid, 0.0)?;
            obj::write_obj(&dir.join(format!("frame_{:04}.obj", f + 1)), &mesh)?;
        }
        eprintln!("[sample] wrote {}", dir.display());
    }
    config.set("sample.steps", Value::from(steps));
    config.set("sample.shift", Value::from(shift));
    config.set("sample.noise", Value::from(noise));
    config.set("sample.resolution", Value::from(resolution));
    config.set("sample.seed", Value::from(seed));
    config.snapshot(out, "sample")
}

fn cmd_reconstruct(
    vae_dir: &PathBuf,
    mesh_path: &PathBuf,
    out: &PathBuf,
    resolution: usize,
    seed: u64,
) -> Result<()> {
    let vae = load_vae(vae_dir)?;
    let mesh = obj::read_obj(mesh_path)?;
    let recon = vae.reconstruct(&mesh, resolution, seed)?;
    if let Some(parent) = out.parent() {
        std::fs::create_dir_all(parent)?;
    }
    obj::write_obj(out, &recon)?;
    eprintln!(
        "[reconstruct] {} -> {} ({} vertices)",
        mesh_path.display(),
        out.display(),
        recon.vertices.len()
    );
    Ok(())
}

fn cmd_register(
    config: &mut RunConfig,
    pred: &PathBuf,
    reference: &PathBuf,
    out: &PathBuf,
    texture: Option<&std::path::Path>,
) -> Result<()> {
    let pred_frames = io_util::read_frames_dir(pred)?;
    let ref_frames = io_util::read_frames_dir(reference)?;
    if pred_frames.len() != ref_frames.len() {
        bail!(
            "frame count mismatch: {} predictions vs {} references",
            pred_frames.len(),
            ref_frames.len()
        );
    }
    std::fs::create_dir_all(out)?;
    // Global registration of the prediction onto the reference.
    let pred_clouds: Vec<_> = pred_frames
        .iter()
        .enumerate()
        .map(|(t, m)| shapegen4d_core::geom::sample_surface(m, 4096, t as u64))
        .collect::<shapegen4d_core::Result<_>>()?;
    let ref_clouds: Vec<_> = ref_frames
        .iter()
        .enumerate()
        .map(|(t, m)| shapegen4d_core::geom::sample_surface(m, 4096, t as u64))
        .collect::<shapegen4d_core::Result<_>>()?;
    let transforms = register_sequence(&pred_clouds, &ref_clouds)?;
    let records: Vec<SimilarityRecord> = transforms.iter().map(SimilarityRecord::from).collect();
    std::fs::write(out.join("transforms.json"), serde_json::to_string_pretty(&records)?)?;
    // Topology-consistent conversion of the registered prediction.
    let registered: Vec<_> = pred_frames
        .iter()
        .zip(&transforms)
        .map(|(m, t)| t.apply_mesh(m))
        .collect();
    eprintln!("[register] converting {} frames to shared topology", registered.len());
    let consistent = topology_consistent_sequence(&registered, &ArapParams::default())?;
    let mut residuals = String::from("frame,chamfer\n");
    for (t, r) in consistent.residuals.iter().enumerate() {
        residuals.push_str(&format!("{},{}\n", t + 1, r));
    }
    std::fs::write(out.join("residuals.csv"), residuals)?;
    let frames = if let Some(texture_path) = texture {
        let textured = propagate_uv(
            &consistent.frames,
            &consistent.frames[0],
            texture_path.to_path_buf(),
        )?;
        std::fs::write(
            out.join("texture.json"),
            serde_json::to_string_pretty(&texture_path.display().to_string())?,
        )?;
        textured.frames
    } else {
        consistent.frames
    };
    for (t, mesh) in frames.iter().enumerate() {
        obj::write_obj(&out.join(format!("frame_{:04}.obj", t + 1)), mesh)?;
    }
    config.snapshot(out, "register")
}

fn cmd_evaluate(
    pred: &PathBuf,
    gt: &PathBuf,
    out: &PathBuf,
    iou_resolution: usize,
    chamfer_points: usize,
    seed: u64,
) -> Result<()> {
    let pred_frames = io_util::read_frames_dir(pred)?;
    let gt_asset = read_sequence(gt)?;
    let config = EvalConfig {
        chamfer_points,
        fscore_tau: 0.05,
        iou_resolution,
        seed,
    };
    let report = evaluate_sequence(&pred_frames, &gt_asset, &config)?;
    if let Some(parent) = out.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(out, serde_json::to_string_pretty(&report)?)?;
    let csv_path = out.with_extension("csv");
    let mut csv = String::from("frame,chamfer,iou,fscore\n");
    for (t, m) in report.per_frame.iter().enumerate() {
        csv.push_str(&format!("{},{},{},{}\n", t + 1, m.chamfer, m.iou, m.fscore));
    }
    csv.push_str(&format!(
        "mean,{},{},{}\n",
        report.chamfer, report.iou, report.fscore
    ));
    std::fs::write(&csv_path, csv)?;
    eprintln!(
        "[evaluate] chamfer {:.4} iou {:.4} fscore {:.4}",
        report.chamfer, report.iou, report.fscore
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_ablate(
    config: &mut RunConfig,
    suite: &str,
    vae_dir: &PathBuf,
    data: &PathBuf,
    val: &PathBuf,
    out: &PathBuf,
    base_steps: usize,
    temporal_steps: usize,
    seed: u64,
) -> Result<()> {
    if suite != "table3" {
        bail!("unknown suite '{suite}' (expected table3)");
    }
    let vae = load_vae(vae_dir)?;
    let train_assets = load_assets(data)?;
    let val_assets = load_assets(val)?;
    let mut dit_config = DitConfig::mini();
    dit_config.latent_count = vae.config.latent_count;
    dit_config.latent_dim = vae.config.latent_dim;
    dit_config.seed = seed;
    let opts = AblationOptions {
        base_steps,
        temporal_steps,
        seed,
        ..Default::default()
    };
    let table = run_ablation_suite(&vae, &train_assets, &val_assets, &dit_config, &opts, |msg| {
        eprintln!("[ablate] {msg}");
    })?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("table.json"), serde_json::to_string_pretty(&table.rows)?)?;
    std::fs::write(out.join("table.csv"), table.to_csv())?;
    for row in &table.rows {
        eprintln!(
            "[ablate] {:<18} chamfer {:.4} iou {:.4} fscore {:.4}",
            row.name, row.chamfer, row.iou, row.fscore
        );
    }
    config.set("ablate.base_steps", Value::from(base_steps));
    config.set("ablate.temporal_steps", Value::from(temporal_steps));
    config.set("ablate.seed", Value::from(seed));
    config.snapshot(out, "ablate")
}
