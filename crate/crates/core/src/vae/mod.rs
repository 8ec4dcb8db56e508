//! Shape VAE: cross-attention encoder from point clouds to a latent set,
//! self-attention bottleneck, and a TSDF decoder queried at 3D positions.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::geom::sample::{salient_edge_sample, sample_surface};
use crate::geom::trigrid::{parity_direction, TriGrid};
use crate::geom::{farthest_point_sample, marching_cubes, PointCloud, TriMesh, Vec3, VoxelGrid};
use crate::nn::layers::{
    fourier_features, fourier_width, AttnArgs, LayerNorm, Linear, Mlp, MultiHeadAttention,
    TransformerBlock,
};
use crate::nn::{Ctx, ParamStore, Tensor, Var};
use crate::{Error, Result};

pub mod train;

pub use train::{build_vae_sample, train_vae, TrainReport, VaeSample};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VaeConfig {
    /// Number of latent vectors (K).
    pub latent_count: usize,
    /// Latent channel width (D).
    pub latent_dim: usize,
    /// Transformer width.
    pub width: usize,
    pub heads: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub fourier_frequencies: usize,
    pub kl_weight: f64,
    /// TSDF truncation band in unit-box units.
    pub tsdf_band: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl VaeConfig {
    /// Desk-scale defaults.
    pub fn desk() -> Self {
        VaeConfig {
            latent_count: 256,
            latent_dim: 32,
            width: 64,
            heads: 4,
            encoder_layers: 2,
            decoder_layers: 2,
            fourier_frequencies: 8,
            kl_weight: 1e-6,
            tsdf_band: 0.0625,
            learning_rate: 5e-5,
            batch_size: 8,
            seed: 0,
        }
    }

    /// Production-scale preset (shape contracts only; not trained here).
    pub fn production() -> Self {
        VaeConfig {
            latent_count: 1024,
            ..Self::desk()
        }
    }

    /// Micro config for gradient checks.
    pub fn micro() -> Self {
        VaeConfig {
            latent_count: 8,
            latent_dim: 8,
            width: 16,
            heads: 2,
            encoder_layers: 1,
            decoder_layers: 1,
            fourier_frequencies: 4,
            kl_weight: 1e-4,
            tsdf_band: 0.0625,
            learning_rate: 1e-3,
            batch_size: 2,
            seed: 0,
        }
    }

    /// Small config sized for CPU training in the test suite.
    pub fn mini() -> Self {
        VaeConfig {
            latent_count: 48,
            latent_dim: 16,
            width: 56,
            heads: 4,
            encoder_layers: 2,
            decoder_layers: 2,
            fourier_frequencies: 8,
            kl_weight: 1e-6,
            tsdf_band: 0.08,
            learning_rate: 1.5e-3,
            batch_size: 4,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_count == 0
            || self.latent_dim == 0
            || self.width == 0
            || self.heads == 0
            || self.width % self.heads != 0
        {
            return Err(Error::invalid("vae dimensions must be positive and divisible"));
        }
        if self.kl_weight < 0.0 {
            return Err(Error::invalid("kl weight must be non-negative"));
        }
        Ok(())
    }
}

/// Posterior over a set of latent vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSet {
    pub mean: Tensor,
    pub logvar: Tensor,
}

impl LatentSet {
    pub fn latent_count(&self) -> usize {
        self.mean.rows()
    }

    pub fn latent_dim(&self) -> usize {
        self.mean.cols()
    }

    /// Reparameterized sample (training path).
    pub fn sample(&self, seed: u64) -> Tensor {
        let mut rng = crate::rng::stream(seed, 0x7a7a);
        let mut out = self.mean.clone();
        for (v, &lv) in out.data.iter_mut().zip(&self.logvar.data) {
            let eps: f64 = rng.sample(StandardNormal);
            *v += eps * (0.5 * lv).exp();
        }
        out
    }

    /// Rows as plain vectors, for the jitter metric.
    pub fn mean_rows(&self) -> Vec<Vec<f64>> {
        (0..self.mean.rows()).map(|i| self.mean.row(i).to_vec()).collect()
    }
}

pub struct ShapeVae {
    pub config: VaeConfig,
    pub store: ParamStore,
    point_embed: Linear,
    query_embed: Linear,
    enc_ln_q: LayerNorm,
    enc_ln_kv: LayerNorm,
    enc_cross: MultiHeadAttention,
    enc_blocks: Vec<TransformerBlock>,
    enc_out_ln: LayerNorm,
    to_posterior: Linear,
    from_latent: Linear,
    dec_blocks: Vec<TransformerBlock>,
    dec_query_embed: Linear,
    dec_ln_kv: LayerNorm,
    dec_cross: Vec<(LayerNorm, MultiHeadAttention, LayerNorm, Mlp)>,
    head_out: Linear,
}

impl ShapeVae {
    pub fn new(config: VaeConfig) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let mut rng = crate::rng::stream(config.seed, 0x766165);
        let w = config.width;
        let pf = fourier_width(config.fourier_frequencies);
        let point_embed = Linear::new(&mut store, "vae.enc.point_embed", pf + 3, w, &mut rng);
        let query_embed = Linear::new(&mut store, "vae.enc.query_embed", pf, w, &mut rng);
        let enc_ln_q = LayerNorm::new(&mut store, "vae.enc.ln_q", w);
        let enc_ln_kv = LayerNorm::new(&mut store, "vae.enc.ln_kv", w);
        let enc_cross =
            MultiHeadAttention::new(&mut store, "vae.enc.cross", w, config.heads, false, &mut rng);
        let enc_blocks = (0..config.encoder_layers)
            .map(|i| TransformerBlock::new(&mut store, &format!("vae.enc.block{i}"), w, config.heads, &mut rng))
            .collect();
        let enc_out_ln = LayerNorm::new(&mut store, "vae.enc.out_ln", w);
        let to_posterior = Linear::new(&mut store, "vae.enc.posterior", w, 2 * config.latent_dim, &mut rng);
        let from_latent = Linear::new(&mut store, "vae.dec.from_latent", config.latent_dim, w, &mut rng);
        let dec_blocks = (0..config.decoder_layers)
            .map(|i| TransformerBlock::new(&mut store, &format!("vae.dec.block{i}"), w, config.heads, &mut rng))
            .collect();
        let dec_query_embed = Linear::new(&mut store, "vae.dec.query_embed", pf, w, &mut rng);
        let dec_ln_kv = LayerNorm::new(&mut store, "vae.dec.ln_kv", w);
        let dec_cross = (0..2)
            .map(|i| {
                (
                    LayerNorm::new(&mut store, &format!("vae.dec.cross{i}.ln_q"), w),
                    MultiHeadAttention::new(
                        &mut store,
                        &format!("vae.dec.cross{i}.attn"),
                        w,
                        config.heads,
                        false,
                        &mut rng,
                    ),
                    LayerNorm::new(&mut store, &format!("vae.dec.cross{i}.ln_m"), w),
                    Mlp::new(&mut store, &format!("vae.dec.cross{i}.mlp"), w, w * 2, &mut rng),
                )
            })
            .collect();
        let head_out = Linear::new_zeroed(&mut store, "vae.dec.head_out", w, 1);
        Ok(ShapeVae {
            config,
            store,
            point_embed,
            query_embed,
            enc_ln_q,
            enc_ln_kv,
            enc_cross,
            enc_blocks,
            enc_out_ln,
            to_posterior,
            from_latent,
            dec_blocks,
            dec_query_embed,
            dec_ln_kv,
            dec_cross,
            head_out,
        })
    }

    /// Encoder graph: returns (mean, logvar) vars of shape [K, D].
    pub fn encode_graph(
        &self,
        ctx: &mut Ctx,
        points: &PointCloud,
        queries: &[Vec3],
    ) -> Result<(Var, Var)> {
        let normals = points
            .normals
            .as_ref()
            .ok_or_else(|| Error::invalid("encoder requires point normals"))?;
        if queries.len() != self.config.latent_count {
            return Err(Error::ShapeMismatch(format!(
                "{} queries vs latent count {}",
                queries.len(),
                self.config.latent_count
            )));
        }
        let store = &self.store;
        // Point features: fourier(position) ++ normal.
        let pf = fourier_features(&points.positions, self.config.fourier_frequencies);
        let mut feat = Vec::with_capacity(points.len() * (pf.cols() + 3));
        for (i, n) in normals.iter().enumerate() {
            feat.extend_from_slice(pf.row(i));
            feat.extend_from_slice(&[n.x, n.y, n.z]);
        }
        let feat = Tensor::new(vec![points.len(), pf.cols() + 3], feat);
        let pts = ctx.constant(feat);
        let pemb = self.point_embed.forward(ctx, store, pts);
        let qf = fourier_features(queries, self.config.fourier_frequencies);
        let qin = ctx.constant(qf);
        let qemb = self.query_embed.forward(ctx, store, qin);
        let qn = self.enc_ln_q.forward(ctx, store, qemb);
        let kn = self.enc_ln_kv.forward(ctx, store, pemb);
        let attn = self
            .enc_cross
            .forward(ctx, store, qn, kn, &AttnArgs::default());
        let mut x = ctx.add(qemb, attn);
        for block in &self.enc_blocks {
            x = block.forward(ctx, store, x);
        }
        let x = self.enc_out_ln.forward(ctx, store, x);
        let post = self.to_posterior.forward(ctx, store, x);
        let d = self.config.latent_dim;
        let mean = ctx.slice_cols(post, 0, d);
        let logvar = ctx.slice_cols(post, d, 2 * d);
        Ok((mean, logvar))
    }

    /// Posterior for the given inputs (no gradients).
    pub fn encode(&self, points: &PointCloud, queries: &[Vec3]) -> Result<LatentSet> {
        let mut ctx = Ctx::inference();
        let (mean, logvar) = self.encode_graph(&mut ctx, points, queries)?;
        Ok(LatentSet {
            mean: ctx.value(mean).clone(),
            logvar: ctx.value(logvar).clone(),
        })
    }

    /// Self-attention over the latent set; run once per set.
    pub fn decode_features_graph(&self, ctx: &mut Ctx, latents: Var) -> Var {
        let store = &self.store;
        let mut l = self.from_latent.forward(ctx, store, latents);
        for block in &self.dec_blocks {
            l = block.forward(ctx, store, l);
        }
        l
    }

    /// Cross-attention of positions against processed latent features; TSDF
    /// predictions [M, 1] bounded to the truncation band by a tanh head.
    pub fn decode_positions_graph(&self, ctx: &mut Ctx, features: Var, positions: &[Vec3]) -> Var {
        let store = &self.store;
        let qf = fourier_features(positions, self.config.fourier_frequencies);
        let qin = ctx.constant(qf);
        let mut h = self.dec_query_embed.forward(ctx, store, qin);
        let kn = self.dec_ln_kv.forward(ctx, store, features);
        for (ln_q, attn, ln_m, mlp) in &self.dec_cross {
            let qn = ln_q.forward(ctx, store, h);
            let a = attn.forward(ctx, store, qn, kn, &AttnArgs::default());
            h = ctx.add(h, a);
            let mn = ln_m.forward(ctx, store, h);
            let m = mlp.forward(ctx, store, mn);
            h = ctx.add(h, m);
        }
        let raw = self.head_out.forward(ctx, store, h);
        // Bounded head: band * tanh(raw / band) keeps predictions inside the
        // truncation band with the strongest gradient at the crossing.
        let band = self.config.tsdf_band;
        let scaled = ctx.scale(raw, 1.0 / band);
        let t = ctx.tanh(scaled);
        ctx.scale(t, band)
    }

    /// Decoded TSDF values at `positions`, clamped to the truncation band.
    pub fn decode_tsdf(&self, latents: &Tensor, positions: &[Vec3]) -> Result<Vec<f64>> {
        if latents.rows() != self.config.latent_count || latents.cols() != self.config.latent_dim {
            return Err(Error::ShapeMismatch(format!(
                "latents {:?} vs config K={} D={}",
                latents.shape, self.config.latent_count, self.config.latent_dim
            )));
        }
        // Process the latent set once, then stream positions in chunks.
        let features = {
            let mut ctx = Ctx::inference();
            let l = ctx.constant(latents.clone());
            let f = self.decode_features_graph(&mut ctx, l);
            ctx.value(f).clone()
        };
        let band = self.config.tsdf_band;
        let mut out = Vec::with_capacity(positions.len());
        for chunk in positions.chunks(8192) {
            let mut ctx = Ctx::inference();
            let f = ctx.constant(features.clone());
            let pred = self.decode_positions_graph(&mut ctx, f, chunk);
            out.extend(ctx.value(pred).data.iter().map(|v| v.clamp(-band, band)));
        }
        Ok(out)
    }

    /// Decoded TSDF over a full cell-centered grid.
    pub fn decode_grid(&self, latents: &Tensor, resolution: usize) -> Result<VoxelGrid> {
        let mut grid = VoxelGrid::unit_box(resolution);
        let mut positions = Vec::with_capacity(grid.len());
        for z in 0..resolution {
            for y in 0..resolution {
                for x in 0..resolution {
                    positions.push(grid.center(x, y, z));
                }
            }
        }
        grid.values = self.decode_tsdf(latents, &positions)?;
        Ok(grid)
    }

    /// encode -> decode grid -> marching cubes at iso 0.
    pub fn reconstruct(&self, mesh: &TriMesh, resolution: usize, seed: u64) -> Result<TriMesh> {
        let latents = self.encode_mesh(mesh, seed)?;
        let grid = self.decode_grid(&latents.mean, resolution)?;
        marching_cubes(&grid, 0.0)
    }

    /// Standard encoder input preparation for a watertight mesh: dense
    /// surface samples (with a salient-edge augmentation when present) and
    /// FPS query points.
    pub fn encode_mesh(&self, mesh: &TriMesh, seed: u64) -> Result<LatentSet> {
        let (points, queries) =
            encoder_inputs(mesh, default_dense_points(&self.config), self.config.latent_count, seed)?;
        self.encode(&points, &queries)
    }
}

/// Dense point budget scaled to the config size.
pub fn default_dense_points(config: &VaeConfig) -> usize {
    (config.latent_count * 24).clamp(512, 32768)
}

/// Dense cloud (7/8 surface, 1/8 salient edges when present) plus FPS
/// queries drawn from the same cloud.
pub fn encoder_inputs(
    mesh: &TriMesh,
    dense_n: usize,
    k: usize,
    seed: u64,
) -> Result<(PointCloud, Vec<Vec3>)> {
    let salient_budget = dense_n / 8;
    let salient = salient_edge_sample(mesh, salient_budget, std::f64::consts::FRAC_PI_4, seed)?;
    let surface_n = dense_n - salient.len();
    let surface = sample_surface(mesh, surface_n, seed)?;
    let mut positions = surface.positions;
    let mut normals = surface.normals.unwrap();
    if !salient.is_empty() {
        positions.extend_from_slice(&salient.positions);
        normals.extend_from_slice(salient.normals.as_ref().unwrap());
    }
    let cloud = PointCloud {
        positions,
        normals: Some(normals),
    };
    let picked = farthest_point_sample(&cloud, k, seed)?;
    let queries = picked.iter().map(|&i| cloud.positions[i]).collect();
    Ok((cloud, queries))
}

/// KL divergence of a diagonal Gaussian posterior against the unit prior,
/// averaged over elements: 0.5 * mean(mu^2 + exp(lv) - 1 - lv).
pub fn kl_term(ctx: &mut Ctx, mean: Var, logvar: Var) -> Var {
    let mu2 = ctx.square(mean);
    let e = ctx.exp(logvar);
    let m_mu2 = ctx.mean_all(mu2);
    let m_e = ctx.mean_all(e);
    let m_lv = ctx.mean_all(logvar);
    ctx.combine_scalars(&[(m_mu2, 0.5), (m_e, 0.5), (m_lv, -0.5)], -0.5)
}

/// Reparameterized sample as a graph op: z = mu + eps * exp(0.5 * lv).
pub fn reparameterize(ctx: &mut Ctx, mean: Var, logvar: Var, seed: u64) -> Var {
    let shape = ctx.value(mean).shape.clone();
    let n: usize = shape.iter().product();
    let mut rng = crate::rng::stream(seed, 0x7a7a);
    let eps: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let eps = ctx.constant(Tensor::new(shape, eps));
    let half_lv = ctx.scale(logvar, 0.5);
    let sigma = ctx.exp(half_lv);
    let noise = ctx.mul(eps, sigma);
    ctx.add(mean, noise)
}

/// IoU of the decoded occupancy (TSDF < 0) against the mesh's occupancy
/// rasterization, at the given resolution.
pub fn reconstruction_iou(vae: &ShapeVae, mesh: &TriMesh, resolution: usize, seed: u64) -> Result<f64> {
    let latents = vae.encode_mesh(mesh, seed)?;
    let pred = vae.decode_grid(&latents.mean, resolution)?;
    let mut pred_occ = pred.clone();
    for v in pred_occ.values.iter_mut() {
        *v = if *v < 0.0 { 1.0 } else { 0.0 };
    }
    let gt = crate::geom::voxelize_occupancy(mesh, resolution)?;
    crate::geom::grid_iou(&pred_occ, &gt)
}

/// Sign agreement of the decoded TSDF against an inside/outside oracle on a
/// cell-centered grid.
pub fn sign_agreement(vae: &ShapeVae, mesh: &TriMesh, resolution: usize, seed: u64) -> Result<f64> {
    let latents = vae.encode_mesh(mesh, seed)?;
    let pred = vae.decode_grid(&latents.mean, resolution)?;
    let accel = TriGrid::build(mesh);
    let dir = parity_direction();
    let grid = VoxelGrid::unit_box(resolution);
    let mut agree = 0usize;
    for z in 0..resolution {
        for y in 0..resolution {
            for x in 0..resolution {
                let inside = accel.contains(grid.center(x, y, z), dir);
                let pred_inside = pred.values[grid.index(x, y, z)] < 0.0;
                agree += (inside == pred_inside) as usize;
            }
        }
    }
    Ok(agree as f64 / grid.len() as f64)
}
