//! Per-frame base model: dual-stream then single-stream transformer blocks
//! with adaptive layer modulation from the denoising time, plus a
//! zero-initialized velocity head.

use super::cond::CondEncoder;
use super::DitConfig;
use crate::data::SilhouetteImage;
use crate::nn::layers::{timestep_features, Linear};
use crate::nn::{AttnMask, Ctx, ParamStore, Var};
use crate::rng::Rng;
use crate::Result;

/// Six modulation vectors (scale/shift/gate for attention and MLP) derived
/// from the timestep embedding; the producing linear is zero-initialized so
/// every block starts as identity.
#[derive(Debug, Clone)]
struct Modulation {
    linear: Linear,
}

impl Modulation {
    fn new(store: &mut ParamStore, name: &str, width: usize) -> Self {
        Modulation {
            linear: Linear::new_zeroed(store, name, width, 6 * width),
        }
    }

    fn forward(&self, ctx: &mut Ctx, store: &ParamStore, t_emb: Var, width: usize) -> [Var; 6] {
        let m = self.linear.forward(ctx, store, t_emb);
        let mut out = Vec::with_capacity(6);
        for i in 0..6 {
            out.push(ctx.slice_cols(m, i * width, (i + 1) * width));
        }
        [out[0], out[1], out[2], out[3], out[4], out[5]]
    }
}

/// One attention + MLP residual pass under modulation. `gate1/gate2` are
/// applied to the residual branches.
#[derive(Debug, Clone)]
struct StreamParams {
    qkv_q: Linear,
    qkv_k: Linear,
    qkv_v: Linear,
    proj: Linear,
    mlp_in: Linear,
    mlp_out: Linear,
    modulation: Modulation,
}

impl StreamParams {
    fn new(store: &mut ParamStore, name: &str, width: usize, rng: &mut Rng) -> Self {
        StreamParams {
            qkv_q: Linear::new(store, &format!("{name}.wq"), width, width, rng),
            qkv_k: Linear::new(store, &format!("{name}.wk"), width, width, rng),
            qkv_v: Linear::new(store, &format!("{name}.wv"), width, width, rng),
            proj: Linear::new(store, &format!("{name}.proj"), width, width, rng),
            mlp_in: Linear::new(store, &format!("{name}.mlp_in"), width, width * 4, rng),
            mlp_out: Linear::new(store, &format!("{name}.mlp_out"), width * 4, width, rng),
            modulation: Modulation::new(store, &format!("{name}.mod"), width),
        }
    }
}

/// Dual-stream block: separate projections for the shape and condition
/// streams, one joint attention over the concatenated tokens.
#[derive(Debug, Clone)]
struct DualBlock {
    shape: StreamParams,
    cond: StreamParams,
}

/// Single-stream block: both token sets concatenated under shared weights.
#[derive(Debug, Clone)]
struct SingleBlock {
    joint: StreamParams,
}

#[derive(Debug, Clone)]
pub struct BaseModel {
    pub config: DitConfig,
    pub cond_encoder: CondEncoder,
    latent_in: Linear,
    t_embed_1: Linear,
    t_embed_2: Linear,
    dual: Vec<DualBlock>,
    single: Vec<SingleBlock>,
    head_mod: Linear,
    head_out: Linear,
}

/// Builds the per-frame base model. All parameters live under the `base.`
/// prefix so the temporal stage can freeze them wholesale.
pub fn build_base(config: &DitConfig, store: &mut ParamStore) -> Result<BaseModel> {
    config.validate()?;
    let mut rng = crate::rng::stream(config.seed, 0x646974);
    let w = config.width;
    let cond_encoder = CondEncoder::new(
        store,
        "base.cond",
        config.cond_resolution,
        config.cond_patch,
        w,
        config.heads,
        config.cond_blocks,
        &mut rng,
    );
    let latent_in = Linear::new(store, "base.latent_in", config.latent_dim, w, &mut rng);
    let t_embed_1 = Linear::new(store, "base.t1", w, w, &mut rng);
    let t_embed_2 = Linear::new(store, "base.t2", w, w, &mut rng);
    let dual = (0..config.dual_blocks)
        .map(|i| DualBlock {
            shape: StreamParams::new(store, &format!("base.dual{i}.shape"), w, &mut rng),
            cond: StreamParams::new(store, &format!("base.dual{i}.cond"), w, &mut rng),
        })
        .collect();
    let single = (0..config.single_blocks)
        .map(|i| SingleBlock {
            joint: StreamParams::new(store, &format!("base.single{i}"), w, &mut rng),
        })
        .collect();
    let head_mod = Linear::new_zeroed(store, "base.head_mod", w, 2 * w);
    let head_out = Linear::new_zeroed(store, "base.head", w, config.latent_dim);
    Ok(BaseModel {
        config: config.clone(),
        cond_encoder,
        latent_in,
        t_embed_1,
        t_embed_2,
        dual,
        single,
        head_mod,
        head_out,
    })
}

impl BaseModel {
    /// Timestep embedding [1, width].
    pub fn embed_time(&self, ctx: &mut Ctx, store: &ParamStore, t: f64) -> Var {
        let feats = ctx.constant(timestep_features(t, self.config.width));
        let h = self.t_embed_1.forward(ctx, store, feats);
        let h = ctx.silu(h);
        self.t_embed_2.forward(ctx, store, h)
    }

    /// Embeds condition tokens for one frame.
    pub fn embed_condition(
        &self,
        ctx: &mut Ctx,
        store: &ParamStore,
        image: &SilhouetteImage,
    ) -> Result<Var> {
        self.cond_encoder.forward(ctx, store, image)
    }

    /// Embeds noised latents [K, D] -> [K, W].
    pub fn embed_latents(&self, ctx: &mut Ctx, store: &ParamStore, z: Var) -> Var {
        self.latent_in.forward(ctx, store, z)
    }

    /// Runs base block `index` (dual blocks first, then single). Hidden
    /// states are (shape [K, W], cond [C, W]).
    pub fn run_block(
        &self,
        ctx: &mut Ctx,
        store: &ParamStore,
        index: usize,
        x: Var,
        c: Var,
        t_emb: Var,
    ) -> (Var, Var) {
        let w = self.config.width;
        let heads = self.config.heads;
        if index < self.dual.len() {
            let block = &self.dual[index];
            let mx = block.shape.modulation.forward(ctx, store, t_emb, w);
            let mc = block.cond.modulation.forward(ctx, store, t_emb, w);
            // Joint attention with per-stream projections.
            let xn = ctx.layer_norm(x);
            let xn = ctx.affine_rows(xn, mx[0], mx[1]);
            let cn = ctx.layer_norm(c);
            let cn = ctx.affine_rows(cn, mc[0], mc[1]);
            let qx = block.shape.qkv_q.forward(ctx, store, xn);
            let kx = block.shape.qkv_k.forward(ctx, store, xn);
            let vx = block.shape.qkv_v.forward(ctx, store, xn);
            let qc = block.cond.qkv_q.forward(ctx, store, cn);
            let kc = block.cond.qkv_k.forward(ctx, store, cn);
            let vc = block.cond.qkv_v.forward(ctx, store, cn);
            let q = ctx.concat_rows(&[qx, qc]);
            let k = ctx.concat_rows(&[kx, kc]);
            let v = ctx.concat_rows(&[vx, vc]);
            let attn = ctx.sdpa(q, k, v, heads, AttnMask::Full);
            let k_rows = store_rows(ctx, x);
            let ax = ctx.slice_rows(attn, 0, k_rows);
            let total = store_rows(ctx, attn);
            let ac = ctx.slice_rows(attn, k_rows, total);
            let px = block.shape.proj.forward(ctx, store, ax);
            let px = ctx.gate_rows(px, mx[2]);
            let x = ctx.add(x, px);
            let pc = block.cond.proj.forward(ctx, store, ac);
            let pc = ctx.gate_rows(pc, mc[2]);
            let c = ctx.add(c, pc);
            // Per-stream MLPs.
            let x = mlp_residual(ctx, store, &block.shape, x, &[mx[3], mx[4], mx[5]]);
            let c = mlp_residual(ctx, store, &block.cond, c, &[mc[3], mc[4], mc[5]]);
            (x, c)
        } else {
            let block = &self.single[index - self.dual.len()];
            let m = block.joint.modulation.forward(ctx, store, t_emb, w);
            let k_rows = store_rows(ctx, x);
            let u = ctx.concat_rows(&[x, c]);
            let un = ctx.layer_norm(u);
            let un = ctx.affine_rows(un, m[0], m[1]);
            let q = block.joint.qkv_q.forward(ctx, store, un);
            let kk = block.joint.qkv_k.forward(ctx, store, un);
            let v = block.joint.qkv_v.forward(ctx, store, un);
            let attn = ctx.sdpa(q, kk, v, heads, AttnMask::Full);
            let p = block.joint.proj.forward(ctx, store, attn);
            let p = ctx.gate_rows(p, m[2]);
            let u = ctx.add(u, p);
            let u = mlp_residual(ctx, store, &block.joint, u, &[m[3], m[4], m[5]]);
            let total = store_rows(ctx, u);
            let x = ctx.slice_rows(u, 0, k_rows);
            let c = ctx.slice_rows(u, k_rows, total);
            (x, c)
        }
    }

    pub fn num_blocks(&self) -> usize {
        self.dual.len() + self.single.len()
    }

    /// Final modulated head: hidden [K, W] -> velocity [K, D].
    pub fn head(&self, ctx: &mut Ctx, store: &ParamStore, x: Var, t_emb: Var) -> Var {
        let w = self.config.width;
        let m = self.head_mod.forward(ctx, store, t_emb);
        let scale = ctx.slice_cols(m, 0, w);
        let shift = ctx.slice_cols(m, w, 2 * w);
        let xn = ctx.layer_norm(x);
        let xn = ctx.affine_rows(xn, scale, shift);
        self.head_out.forward(ctx, store, xn)
    }

    /// Per-frame forward: velocity prediction for one noised latent set.
    pub fn forward_frame(
        &self,
        ctx: &mut Ctx,
        store: &ParamStore,
        z: Var,
        cond: Var,
        t_emb: Var,
    ) -> Var {
        let mut x = self.embed_latents(ctx, store, z);
        let mut c = cond;
        for i in 0..self.num_blocks() {
            (x, c) = self.run_block(ctx, store, i, x, c, t_emb);
        }
        self.head(ctx, store, x, t_emb)
    }
}

fn store_rows(ctx: &Ctx, v: Var) -> usize {
    ctx.value(v).rows()
}

fn mlp_residual(
    ctx: &mut Ctx,
    store: &ParamStore,
    stream: &StreamParams,
    x: Var,
    m: &[Var; 3],
) -> Var {
    let xn = ctx.layer_norm(x);
    let xn = ctx.affine_rows(xn, m[0], m[1]);
    let h = stream.mlp_in.forward(ctx, store, xn);
    let h = ctx.gelu(h);
    let h = stream.mlp_out.forward(ctx, store, h);
    let h = ctx.gate_rows(h, m[2]);
    ctx.add(x, h)
}
