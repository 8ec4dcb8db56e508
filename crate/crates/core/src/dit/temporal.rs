//! Spatiotemporal extension: after every frozen base block, an inserted
//! layer attends jointly over all frames' shape and condition hidden states,
//! with a rotary frame-index embedding and zero-initialized output
//! projections.

use super::base::BaseModel;
use super::{Ablation, DitConfig};
use crate::data::SilhouetteImage;
use crate::nn::layers::Linear;
use crate::nn::{AttnMask, Ctx, ParamStore, Var};
use crate::rng::Rng;
use crate::Result;

/// One inserted layer: pre-LN attention and MLP, both output projections
/// zero-initialized so insertion leaves the base model bitwise intact.
struct TemporalLayer {
    wq: Linear,
    wk: Linear,
    wv: Linear,
    wo: Linear,
    mlp_in: Linear,
    mlp_out: Linear,
}

impl TemporalLayer {
    fn new(store: &mut ParamStore, name: &str, width: usize, rng: &mut Rng) -> Self {
        TemporalLayer {
            wq: Linear::new(store, &format!("{name}.wq"), width, width, rng),
            wk: Linear::new(store, &format!("{name}.wk"), width, width, rng),
            wv: Linear::new(store, &format!("{name}.wv"), width, width, rng),
            wo: Linear::new_zeroed(store, &format!("{name}.wo"), width, width),
            mlp_in: Linear::new(store, &format!("{name}.mlp_in"), width, width * 4, rng),
            mlp_out: Linear::new_zeroed(store, &format!("{name}.mlp_out"), width * 4, width),
        }
    }

    /// `joint` is [(rows_per_frame * T), W] with per-row frame positions.
    fn forward(
        &self,
        ctx: &mut Ctx,
        store: &ParamStore,
        joint: Var,
        positions: &[usize],
        rope_base: f64,
        heads: usize,
        mask: AttnMask,
    ) -> Var {
        let n = ctx.layer_norm(joint);
        let mut q = self.wq.forward(ctx, store, n);
        let mut k = self.wk.forward(ctx, store, n);
        let v = self.wv.forward(ctx, store, n);
        q = ctx.rope(q, positions, heads, rope_base);
        k = ctx.rope(k, positions, heads, rope_base);
        let a = ctx.sdpa(q, k, v, heads, mask);
        let a = self.wo.forward(ctx, store, a);
        let joint = ctx.add(joint, a);
        let n = ctx.layer_norm(joint);
        let h = self.mlp_in.forward(ctx, store, n);
        let h = ctx.gelu(h);
        let h = self.mlp_out.forward(ctx, store, h);
        ctx.add(joint, h)
    }
}

pub struct SpatiotemporalModel {
    pub base: BaseModel,
    /// temporal[block][layer].
    temporal: Vec<Vec<TemporalLayer>>,
}

/// Wraps a trained base model with zero-initialized spatiotemporal layers
/// and freezes every base parameter. Inserted layers live under the
/// `temporal.` prefix.
pub fn insert_temporal_layers(
    base: BaseModel,
    store: &mut ParamStore,
) -> Result<SpatiotemporalModel> {
    let config = base.config.clone();
    let mut rng = crate::rng::stream(config.seed, 0x74656d70);
    let mut temporal = Vec::with_capacity(base.num_blocks());
    for b in 0..base.num_blocks() {
        let mut layers = Vec::with_capacity(config.temporal_per_block);
        for l in 0..config.temporal_per_block {
            layers.push(TemporalLayer::new(
                store,
                &format!("temporal.b{b}l{l}"),
                config.width,
                &mut rng,
            ));
        }
        temporal.push(layers);
    }
    let frozen = store.freeze_prefix("base.");
    assert!(frozen > 0, "base parameters must exist before insertion");
    Ok(SpatiotemporalModel { base, temporal })
}

impl SpatiotemporalModel {
    pub fn config(&self) -> &DitConfig {
        &self.base.config
    }

    /// Joint forward over T frames: noised latents (T x [K, D]) and per-frame
    /// condition images. Returns per-frame velocity predictions.
    pub fn forward_sequence(
        &self,
        ctx: &mut Ctx,
        store: &ParamStore,
        latents: &[Var],
        conditions: &[&SilhouetteImage],
        t: f64,
    ) -> Result<Vec<Var>> {
        let frames = latents.len();
        assert_eq!(conditions.len(), frames, "conditions per frame");
        let config = self.config();
        let k = config.latent_count;
        let c_tokens = config.cond_tokens();
        let t_emb = self.base.embed_time(ctx, store, t);
        let mut xs: Vec<Var> = latents
            .iter()
            .map(|&z| self.base.embed_latents(ctx, store, z))
            .collect();
        let mut cs: Vec<Var> = conditions
            .iter()
            .map(|img| self.base.embed_condition(ctx, store, img))
            .collect::<Result<Vec<_>>>()?;
        let ablation = config.ablation;
        for block in 0..self.base.num_blocks() {
            for f in 0..frames {
                let (x, c) = self.base.run_block(ctx, store, block, xs[f], cs[f], t_emb);
                xs[f] = x;
                cs[f] = c;
            }
            for layer in &self.temporal[block] {
                self.run_temporal_layer(
                    ctx, store, layer, &mut xs, &mut cs, k, c_tokens, ablation,
                )?;
            }
        }
        Ok(xs
            .iter()
            .map(|&x| self.base.head(ctx, store, x, t_emb))
            .collect())
    }

    #[allow(clippy::too_many_arguments)]
    fn run_temporal_layer(
        &self,
        ctx: &mut Ctx,
        store: &ParamStore,
        layer: &TemporalLayer,
        xs: &mut [Var],
        cs: &mut [Var],
        k: usize,
        c_tokens: usize,
        ablation: Ablation,
    ) -> Result<()> {
        let frames = xs.len();
        let config = self.config();
        let include_cond = ablation != Ablation::NoImageHidden;
        let rows_per_frame = if include_cond { k + c_tokens } else { k };
        // Joint token matrix over all frames, with per-row frame indices.
        let mut parts = Vec::with_capacity(frames * 2);
        let mut positions = Vec::with_capacity(frames * rows_per_frame);
        for f in 0..frames {
            parts.push(xs[f]);
            if include_cond {
                parts.push(cs[f]);
            }
            positions.extend(std::iter::repeat(f).take(rows_per_frame));
        }
        let joint = ctx.concat_rows(&parts);
        let mask = match ablation {
            Ablation::Temporal1d => AttnMask::SameIndexAcrossFrames {
                tokens_per_frame: rows_per_frame,
            },
            _ => AttnMask::Full,
        };
        let out = layer.forward(
            ctx,
            store,
            joint,
            &positions,
            config.rope_base,
            config.heads,
            mask,
        );
        for f in 0..frames {
            let lo = f * rows_per_frame;
            xs[f] = ctx.slice_rows(out, lo, lo + k);
            if include_cond {
                cs[f] = ctx.slice_rows(out, lo + k, lo + k + c_tokens);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::camera::CameraPose6;
    use crate::dit::base::build_base;
    use crate::nn::Tensor;

    fn image(res: usize, fill: f64) -> SilhouetteImage {
        SilhouetteImage {
            resolution: res,
            values: vec![fill; res * res],
            camera: CameraPose6 {
                yaw: 0.0,
                pitch: 0.0,
                radius: 2.0,
                lookat: [0.0; 3],
            },
        }
    }

    fn random_latents(config: &DitConfig, seed: u64) -> Tensor {
        use rand::Rng;
        let mut rng = crate::rng::rng(seed);
        Tensor::new(
            vec![config.latent_count, config.latent_dim],
            (0..config.latent_count * config.latent_dim)
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect(),
        )
    }

    /// Randomizes the zero-initialized head so the base produces nonzero
    /// velocities in tests.
    fn scramble_head(store: &mut ParamStore) {
        use rand::Rng;
        let mut rng = crate::rng::rng(99);
        for id in store.ids() {
            if store.name(id).contains("head") || store.name(id).contains("mod") {
                let t = store.value_mut(id);
                for v in t.data.iter_mut() {
                    *v = rng.gen_range(-0.2..0.2);
                }
            }
        }
    }

    #[test]
    fn zero_init_insertion_matches_base_bitwise() {
        let config = DitConfig::micro();
        let mut store = ParamStore::new();
        let base = build_base(&config, &mut store).unwrap();
        scramble_head(&mut store);
        // Per-frame base outputs before insertion.
        let img_a = image(config.cond_resolution, 0.4);
        let img_b = image(config.cond_resolution, 0.9);
        let za = random_latents(&config, 1);
        let zb = random_latents(&config, 2);
        let base_out = {
            let mut outs = Vec::new();
            for (z, img) in [(&za, &img_a), (&zb, &img_b)] {
                let mut ctx = Ctx::inference();
                let zv = ctx.constant(z.clone());
                let cond = base.embed_condition(&mut ctx, &store, img).unwrap();
                let t = base.embed_time(&mut ctx, &store, 0.4);
                let v = base.forward_frame(&mut ctx, &store, zv, cond, t);
                outs.push(ctx.value(v).clone());
            }
            outs
        };
        let model = insert_temporal_layers(base, &mut store).unwrap();
        let mut ctx = Ctx::inference();
        let zva = ctx.constant(za);
        let zvb = ctx.constant(zb);
        let outs = model
            .forward_sequence(&mut ctx, &store, &[zva, zvb], &[&img_a, &img_b], 0.4)
            .unwrap();
        for (o, expect) in outs.iter().zip(&base_out) {
            assert_eq!(ctx.value(*o).data, expect.data, "insertion changed outputs");
        }
    }

    #[test]
    fn attention_matrix_covers_all_joint_tokens() {
        // T=2 frames, K=8 latents, C=4 condition tokens -> 24 joint tokens.
        let mut config = DitConfig::micro();
        config.cond_resolution = 16;
        config.cond_patch = 8; // 4 tokens
        let mut store = ParamStore::new();
        let base = build_base(&config, &mut store).unwrap();
        let model = insert_temporal_layers(base, &mut store).unwrap();
        let joint_tokens = (config.latent_count + config.cond_tokens()) * 2;
        assert_eq!(joint_tokens, 24);
        // Forward runs with that joint size.
        let img = image(config.cond_resolution, 0.5);
        let mut ctx = Ctx::inference();
        let z1 = ctx.constant(random_latents(&config, 3));
        let z2 = ctx.constant(random_latents(&config, 4));
        let outs = model
            .forward_sequence(&mut ctx, &store, &[z1, z2], &[&img, &img], 0.2)
            .unwrap();
        assert_eq!(outs.len(), 2);
    }

    #[test]
    fn frozen_base_params_flagged() {
        let config = DitConfig::micro();
        let mut store = ParamStore::new();
        let base = build_base(&config, &mut store).unwrap();
        let _model = insert_temporal_layers(base, &mut store).unwrap();
        for id in store.ids() {
            let frozen = store.is_frozen(id);
            let is_base = store.name(id).starts_with("base.");
            assert_eq!(frozen, is_base, "{}", store.name(id));
        }
    }
}
