//! Glue between assets, the frozen VAE, and diffusion training samples.

use rand::Rng as _;

use crate::align::{aligned_queries, independent_queries, latent_jitter, QuerySequence};
use crate::data::asset::AnimatedAsset;
use crate::data::camera::CameraPose6;
use crate::data::silhouette::{render_silhouette, SilhouetteImage};
use crate::dit::{BaseSample, SequenceSample};
use crate::vae::{encoder_inputs, ShapeVae};
use crate::Result;

/// Fixed-view conditioning camera at a seeded random azimuth, framed so the
/// asset spans a fixed fraction of the image height.
pub fn conditioning_camera(asset: &AnimatedAsset, seed: u64) -> Result<CameraPose6> {
    let (lo, hi) = asset.union_bbox();
    let center = (lo + hi) * 0.5;
    let bound = ((hi - lo).norm() * 0.5).max(1e-3);
    let mut rng = crate::rng::stream(seed, 0x636f6e64);
    let yaw = rng.gen_range(0.0..std::f64::consts::TAU);
    let radius = CameraPose6::framing_radius(bound, 0.6);
    CameraPose6::new(yaw, 0.3, radius, center)
}

/// Renders the conditioning views of every frame from one camera.
pub fn conditioning_views(
    asset: &AnimatedAsset,
    camera: &CameraPose6,
    resolution: usize,
) -> Result<Vec<SilhouetteImage>> {
    (1..=asset.frame_count)
        .map(|t| render_silhouette(asset.frame(t), camera, resolution))
        .collect()
}

/// Encodes one asset into a latent sequence through the frozen VAE, with
/// aligned or independently sampled queries.
pub fn encode_asset(
    vae: &ShapeVae,
    asset: &AnimatedAsset,
    aligned: bool,
    seed: u64,
) -> Result<(Vec<crate::nn::Tensor>, QuerySequence)> {
    let k = vae.config.latent_count;
    let queries = if aligned {
        aligned_queries(asset, k, seed)?
    } else {
        independent_queries(asset, k, seed)?
    };
    let dense_n = crate::vae::default_dense_points(&vae.config);
    let mut latents = Vec::with_capacity(asset.frame_count);
    for t in 1..=asset.frame_count {
        // Dense cloud from the watertight frame; query positions carry the
        // temporal alignment (or not, for the ablation). One shared sampling
        // seed: a static asset then produces bitwise-identical latents.
        let (dense, _) = encoder_inputs(asset.watertight_frame(t), dense_n, k, seed)?;
        let set = vae.encode(&dense, &queries.positions[t - 1])?;
        latents.push(set.mean);
    }
    Ok((latents, queries))
}

/// Sequence samples for temporal training.
pub fn sequence_dataset(
    vae: &ShapeVae,
    assets: &[AnimatedAsset],
    cond_resolution: usize,
    aligned: bool,
    seed: u64,
) -> Result<Vec<SequenceSample>> {
    let mut out = Vec::with_capacity(assets.len());
    for (i, asset) in assets.iter().enumerate() {
        let asset_seed = seed.wrapping_add(i as u64 * 7919);
        let (latents, _) = encode_asset(vae, asset, aligned, asset_seed)?;
        let camera = conditioning_camera(asset, asset_seed)?;
        let conditions = conditioning_views(asset, &camera, cond_resolution)?;
        out.push(SequenceSample {
            latents,
            conditions,
        });
    }
    Ok(out)
}

/// Per-frame samples for base training, flattened from sequence samples.
pub fn base_dataset(sequences: &[SequenceSample]) -> Vec<BaseSample> {
    sequences
        .iter()
        .flat_map(|s| {
            s.latents
                .iter()
                .zip(&s.conditions)
                .map(|(z, c)| BaseSample {
                    latents: z.clone(),
                    condition: c.clone(),
                })
        })
        .collect()
}

/// Latent jitter of one asset through the VAE, under aligned or independent
/// query sampling.
pub fn sequence_jitter(vae: &ShapeVae, asset: &AnimatedAsset, aligned: bool, seed: u64) -> Result<f64> {
    let (latents, queries) = encode_asset(vae, asset, aligned, seed)?;
    let rows: Vec<Vec<Vec<f64>>> = latents
        .iter()
        .map(|t| (0..t.rows()).map(|i| t.row(i).to_vec()).collect())
        .collect();
    latent_jitter(&rows, &queries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::asset::{gen_asset, Warp, WarpFamily};
    use crate::data::normalize_sequence;
    use crate::vae::VaeConfig;

    #[test]
    fn dataset_shapes_line_up() {
        let vae = ShapeVae::new(VaeConfig::micro()).unwrap();
        let asset = normalize_sequence(
            &gen_asset(Warp::default_for(WarpFamily::PulseSphere), 3, 1).unwrap(),
        )
        .unwrap();
        let seqs = sequence_dataset(&vae, &[asset], 16, true, 0).unwrap();
        assert_eq!(seqs.len(), 1);
        assert_eq!(seqs[0].latents.len(), 3);
        assert_eq!(seqs[0].conditions.len(), 3);
        assert_eq!(seqs[0].latents[0].shape, vec![8, 8]);
        let base = base_dataset(&seqs);
        assert_eq!(base.len(), 3);
    }

    #[test]
    fn static_asset_aligned_jitter_is_zero() {
        let vae = ShapeVae::new(VaeConfig::micro()).unwrap();
        let asset = gen_asset(
            Warp::PulseSphere {
                r_start: 0.3,
                r_end: 0.3,
                drift: [0.0; 3],
            },
            3,
            0,
        )
        .unwrap();
        // Same queries + same dense inputs per frame -> identical latents.
        let j_aligned = sequence_jitter(&vae, &asset, true, 5).unwrap();
        assert!(j_aligned < 1e-12, "jitter {j_aligned}");
        let j_indep = sequence_jitter(&vae, &asset, false, 5).unwrap();
        assert!(j_indep > j_aligned);
    }
}
