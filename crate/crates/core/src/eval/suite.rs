//! Remove-one-component ablation suite: trains the temporal stage under each
//! configuration and ranks the variants on held-out geometry.

use serde::{Deserialize, Serialize};

use super::dataset::{base_dataset, conditioning_camera, conditioning_views, sequence_dataset};
use super::{evaluate_sequence, EvalConfig};
use crate::data::asset::AnimatedAsset;
use crate::dit::{
    build_base, insert_temporal_layers, sample_sequence, train_base, train_temporal, Ablation,
    DitConfig, NoiseMode, SequenceSample,
};
use crate::geom::{marching_cubes, TriMesh};
use crate::nn::ParamStore;
use crate::vae::ShapeVae;
use crate::Result;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub chamfer: f64,
    pub iou: f64,
    pub fscore: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationSuite {
    /// Rows sorted by ascending Chamfer (best first).
    pub rows: Vec<AblationRow>,
}

impl AblationSuite {
    pub fn row(&self, name: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,chamfer,iou,fscore\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.name, r.chamfer, r.iou, r.fscore));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct AblationOptions {
    pub base_steps: usize,
    pub temporal_steps: usize,
    pub sample_steps: usize,
    pub decode_resolution: usize,
    pub eval: EvalConfig,
    pub seed: u64,
}

impl Default for AblationOptions {
    fn default() -> Self {
        AblationOptions {
            base_steps: 800,
            temporal_steps: 800,
            sample_steps: 8,
            decode_resolution: 32,
            eval: EvalConfig {
                chamfer_points: 2048,
                fscore_tau: 0.05,
                iou_resolution: 32,
                seed: 0,
            },
            seed: 0,
        }
    }
}

pub const ABLATIONS: [Ablation; 6] = [
    Ablation::None,
    Ablation::NoAlign,
    Ablation::NoSharedNoise,
    Ablation::Temporal1d,
    Ablation::NoImageHidden,
    Ablation::NoShift,
];

/// Decodes sampled latent frames into meshes.
pub fn decode_sequence(
    vae: &ShapeVae,
    latents: &[crate::nn::Tensor],
    resolution: usize,
) -> Result<Vec<TriMesh>> {
    latents
        .iter()
        .map(|z| {
            let grid = vae.decode_grid(z, resolution)?;
            marching_cubes(&grid, 0.0)
        })
        .collect()
}

/// Samples and evaluates one trained variant on the held-out assets.
#[allow(clippy::too_many_arguments)]
fn evaluate_variant(
    vae: &ShapeVae,
    model: &crate::dit::SpatiotemporalModel,
    store: &ParamStore,
    val_assets: &[AnimatedAsset],
    opts: &AblationOptions,
) -> Result<(f64, f64, f64)> {
    let config = model.config();
    let noise_mode = match config.ablation {
        Ablation::NoSharedNoise => NoiseMode::Independent,
        _ => NoiseMode::Shared,
    };
    let mut chamfer = 0.0;
    let mut iou = 0.0;
    let mut fscore = 0.0;
    for (i, asset) in val_assets.iter().enumerate() {
        let asset_seed = opts.seed.wrapping_add(5000 + i as u64);
        let camera = conditioning_camera(asset, asset_seed)?;
        let views = conditioning_views(asset, &camera, config.cond_resolution)?;
        let view_refs: Vec<_> = views.iter().collect();
        let latents = sample_sequence(
            model,
            store,
            &view_refs,
            opts.sample_steps,
            asset_seed,
            noise_mode,
            config.sample_shift,
        )?;
        let meshes = decode_sequence(vae, &latents, opts.decode_resolution)?;
        let report = evaluate_sequence(&meshes, asset, &opts.eval)?;
        chamfer += report.chamfer;
        iou += report.iou;
        fscore += report.fscore;
    }
    let n = val_assets.len() as f64;
    Ok((chamfer / n, iou / n, fscore / n))
}

/// Trains and evaluates all six configurations. The base model and both
/// latent datasets are shared; each variant trains its own temporal layers.
/// Identical seeds produce identical tables.
pub fn run_ablation_suite(
    vae: &ShapeVae,
    train_assets: &[AnimatedAsset],
    val_assets: &[AnimatedAsset],
    dit_config: &DitConfig,
    opts: &AblationOptions,
    mut progress: impl FnMut(&str),
) -> Result<AblationSuite> {
    progress("encoding aligned latent sequences");
    let aligned = sequence_dataset(vae, train_assets, dit_config.cond_resolution, true, opts.seed)?;
    progress("encoding independent latent sequences");
    let independent =
        sequence_dataset(vae, train_assets, dit_config.cond_resolution, false, opts.seed)?;
    progress("training base model");
    let mut base_store = ParamStore::new();
    let base = build_base(dit_config, &mut base_store)?;
    let base_frames = base_dataset(&aligned);
    train_base(&base, &mut base_store, &base_frames, opts.base_steps, |_, _| {})?;

    let mut rows = Vec::new();
    for ablation in ABLATIONS {
        if ablation == Ablation::NoShift {
            // Shares the full-method training; only sampling changes.
            continue;
        }
        progress(&format!("training temporal stage: {ablation}"));
        let mut config = dit_config.clone();
        config.ablation = ablation;
        let (model, store) = train_variant(
            &base,
            &base_store,
            &config,
            if ablation == Ablation::NoAlign {
                &independent
            } else {
                &aligned
            },
            opts,
        )?;
        progress(&format!("evaluating: {ablation}"));
        let (c, i, f) = evaluate_variant(vae, &model, &store, val_assets, opts)?;
        rows.push(AblationRow {
            name: ablation.to_string(),
            chamfer: c,
            iou: i,
            fscore: f,
        });
        if ablation == Ablation::None {
            // Re-evaluate the very same weights without the sampling shift.
            progress("evaluating: no-shift");
            let mut shifted = model;
            set_ablation(&mut shifted, Ablation::NoShift);
            let (c, i, f) = evaluate_variant(vae, &shifted, &store, val_assets, opts)?;
            rows.push(AblationRow {
                name: Ablation::NoShift.to_string(),
                chamfer: c,
                iou: i,
                fscore: f,
            });
        }
    }
    rows.sort_by(|a, b| a.chamfer.partial_cmp(&b.chamfer).unwrap());
    Ok(AblationSuite { rows })
}

fn set_ablation(model: &mut crate::dit::SpatiotemporalModel, ablation: Ablation) {
    model.base.config.ablation = ablation;
}

/// Clones the trained base and trains fresh temporal layers under `config`.
fn train_variant(
    base: &crate::dit::BaseModel,
    base_store: &ParamStore,
    config: &DitConfig,
    dataset: &[SequenceSample],
    opts: &AblationOptions,
) -> Result<(crate::dit::SpatiotemporalModel, ParamStore)> {
    let mut store = base_store.clone();
    let mut base = base.clone();
    base.config = config.clone();
    let model = insert_temporal_layers(base, &mut store)?;
    train_temporal(&model, &mut store, dataset, opts.temporal_steps, |_, _| {})?;
    Ok((model, store))
}
