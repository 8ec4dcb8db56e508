//! Reusable layers on top of the autodiff ops.

use super::graph::{AttnMask, Ctx, Var};
use super::params::{ParamId, ParamStore};
use super::tensor::Tensor;
use crate::rng::Rng;

#[derive(Debug, Clone)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, d_in: usize, d_out: usize, rng: &mut Rng) -> Self {
        Linear {
            w: store.add_xavier(format!("{name}.w"), d_in, d_out, rng),
            b: store.add_zeros(format!("{name}.b"), &[d_out]),
        }
    }

    /// Zero-initialized output projection; the layer contributes nothing
    /// until trained.
    pub fn new_zeroed(store: &mut ParamStore, name: &str, d_in: usize, d_out: usize) -> Self {
        Linear {
            w: store.add_zeros(format!("{name}.w"), &[d_in, d_out]),
            b: store.add_zeros(format!("{name}.b"), &[d_out]),
        }
    }

    pub fn forward(&self, ctx: &mut Ctx, store: &ParamStore, x: Var) -> Var {
        let w = ctx.param(store, self.w);
        let b = ctx.param(store, self.b);
        let y = ctx.matmul(x, w);
        ctx.add_bias(y, b)
    }
}

/// Layer norm with learned scale/shift.
#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> Self {
        LayerNorm {
            gamma: store.add_ones(format!("{name}.g"), &[dim]),
            beta: store.add_zeros(format!("{name}.b"), &[dim]),
        }
    }

    pub fn forward(&self, ctx: &mut Ctx, store: &ParamStore, x: Var) -> Var {
        let n = ctx.layer_norm(x);
        let g = ctx.param(store, self.gamma);
        let b = ctx.param(store, self.beta);
        // gamma * xhat + beta == affine_rows with scale = gamma - 1.
        let ones = ctx.constant(Tensor::new(
            store.value(self.gamma).shape.clone(),
            vec![1.0; store.value(self.gamma).len()],
        ));
        let gm1 = ctx.sub(g, ones);
        ctx.affine_rows(n, gm1, b)
    }
}

#[derive(Debug, Clone)]
pub struct Mlp {
    pub fc1: Linear,
    pub fc2: Linear,
}

impl Mlp {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize, hidden: usize, rng: &mut Rng) -> Self {
        Mlp {
            fc1: Linear::new(store, &format!("{name}.fc1"), dim, hidden, rng),
            fc2: Linear::new(store, &format!("{name}.fc2"), hidden, dim, rng),
        }
    }

    /// Like [`new`] but with a zero-initialized output projection.
    pub fn new_zeroed_out(
        store: &mut ParamStore,
        name: &str,
        dim: usize,
        hidden: usize,
        rng: &mut Rng,
    ) -> Self {
        Mlp {
            fc1: Linear::new(store, &format!("{name}.fc1"), dim, hidden, rng),
            fc2: Linear::new_zeroed(store, &format!("{name}.fc2"), hidden, dim),
        }
    }

    pub fn forward(&self, ctx: &mut Ctx, store: &ParamStore, x: Var) -> Var {
        let h = self.fc1.forward(ctx, store, x);
        let h = ctx.gelu(h);
        self.fc2.forward(ctx, store, h)
    }
}

/// Multi-head attention with optional rotary embedding on q/k and optional
/// masking. Cross-attention when `kv` differs from `q`.
#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
    pub heads: usize,
}

pub struct AttnArgs<'a> {
    /// Positions for rotary embedding of queries and keys; none disables RoPE.
    pub rope_q: Option<&'a [usize]>,
    pub rope_k: Option<&'a [usize]>,
    pub rope_base: f64,
    pub mask: AttnMask,
}

impl Default for AttnArgs<'_> {
    fn default() -> Self {
        AttnArgs {
            rope_q: None,
            rope_k: None,
            rope_base: 10000.0,
            mask: AttnMask::Full,
        }
    }
}

impl MultiHeadAttention {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        dim: usize,
        heads: usize,
        zero_out: bool,
        rng: &mut Rng,
    ) -> Self {
        assert_eq!(dim % heads, 0, "dim must divide heads");
        MultiHeadAttention {
            wq: Linear::new(store, &format!("{name}.wq"), dim, dim, rng),
            wk: Linear::new(store, &format!("{name}.wk"), dim, dim, rng),
            wv: Linear::new(store, &format!("{name}.wv"), dim, dim, rng),
            wo: if zero_out {
                Linear::new_zeroed(store, &format!("{name}.wo"), dim, dim)
            } else {
                Linear::new(store, &format!("{name}.wo"), dim, dim, rng)
            },
            heads,
        }
    }

    pub fn forward(
        &self,
        ctx: &mut Ctx,
        store: &ParamStore,
        q_in: Var,
        kv_in: Var,
        args: &AttnArgs,
    ) -> Var {
        let mut q = self.wq.forward(ctx, store, q_in);
        let mut k = self.wk.forward(ctx, store, kv_in);
        let v = self.wv.forward(ctx, store, kv_in);
        if let Some(pos) = args.rope_q {
            q = ctx.rope(q, pos, self.heads, args.rope_base);
        }
        if let Some(pos) = args.rope_k {
            k = ctx.rope(k, pos, self.heads, args.rope_base);
        }
        let o = ctx.sdpa(q, k, v, self.heads, args.mask);
        self.wo.forward(ctx, store, o)
    }
}

/// Pre-LN residual self-attention block.
#[derive(Debug, Clone)]
pub struct TransformerBlock {
    pub ln1: LayerNorm,
    pub attn: MultiHeadAttention,
    pub ln2: LayerNorm,
    pub mlp: Mlp,
}

impl TransformerBlock {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize, heads: usize, rng: &mut Rng) -> Self {
        TransformerBlock {
            ln1: LayerNorm::new(store, &format!("{name}.ln1"), dim),
            attn: MultiHeadAttention::new(store, &format!("{name}.attn"), dim, heads, false, rng),
            ln2: LayerNorm::new(store, &format!("{name}.ln2"), dim),
            mlp: Mlp::new(store, &format!("{name}.mlp"), dim, dim * 4, rng),
        }
    }

    pub fn forward(&self, ctx: &mut Ctx, store: &ParamStore, x: Var) -> Var {
        let h = self.ln1.forward(ctx, store, x);
        let h = self.attn.forward(ctx, store, h, h, &AttnArgs::default());
        let x = ctx.add(x, h);
        let h = self.ln2.forward(ctx, store, x);
        let h = self.mlp.forward(ctx, store, h);
        ctx.add(x, h)
    }
}

/// Sinusoidal features of a scalar (denoising time), dimension `dim`.
pub fn timestep_features(t: f64, dim: usize) -> Tensor {
    assert!(dim % 2 == 0);
    let half = dim / 2;
    let mut data = Vec::with_capacity(dim);
    for j in 0..half {
        let freq = 10000.0f64.powf(-(j as f64) / half as f64);
        data.push((t * freq * 1000.0).sin());
    }
    for j in 0..half {
        let freq = 10000.0f64.powf(-(j as f64) / half as f64);
        data.push((t * freq * 1000.0).cos());
    }
    Tensor::new(vec![1, dim], data)
}

/// Fourier positional features of 3D points: raw xyz plus sin/cos at
/// `frequencies` octaves per axis. Output width = 3 + 6 * frequencies.
pub fn fourier_features(points: &[crate::geom::Vec3], frequencies: usize) -> Tensor {
    let width = 3 + 6 * frequencies;
    let mut data = Vec::with_capacity(points.len() * width);
    for p in points {
        data.push(p.x);
        data.push(p.y);
        data.push(p.z);
        for f in 0..frequencies {
            let s = std::f64::consts::PI * 2.0f64.powi(f as i32);
            for axis in [p.x, p.y, p.z] {
                data.push((axis * s).sin());
                data.push((axis * s).cos());
            }
        }
    }
    Tensor::new(vec![points.len(), width], data)
}

pub const fn fourier_width(frequencies: usize) -> usize {
    3 + 6 * frequencies
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;

    #[test]
    fn block_preserves_shape() {
        let mut store = ParamStore::new();
        let mut rng = crate::rng::rng(0);
        let block = TransformerBlock::new(&mut store, "b", 16, 4, &mut rng);
        let mut ctx = Ctx::inference();
        let x = ctx.constant(Tensor::zeros(&[10, 16]));
        let y = block.forward(&mut ctx, &store, x);
        assert_eq!(ctx.value(y).shape, vec![10, 16]);
    }

    #[test]
    fn zeroed_attention_is_identity_residual() {
        let mut store = ParamStore::new();
        let mut rng = crate::rng::rng(1);
        let attn = MultiHeadAttention::new(&mut store, "a", 8, 2, true, &mut rng);
        let mut ctx = Ctx::inference();
        let x = ctx.constant(Tensor::new(
            vec![3, 8],
            (0..24).map(|i| i as f64 * 0.1).collect(),
        ));
        let h = attn.forward(&mut ctx, &store, x, x, &AttnArgs::default());
        assert!(ctx.value(h).data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fourier_width_matches() {
        let pts = vec![Vec3::new(0.1, -0.2, 0.3); 4];
        let f = fourier_features(&pts, 8);
        assert_eq!(f.shape, vec![4, fourier_width(8)]);
        assert_eq!(fourier_width(8), 51);
    }

    #[test]
    fn rope_identity_at_position_zero() {
        let mut ctx = Ctx::inference();
        let x = ctx.constant(Tensor::new(vec![2, 8], (0..16).map(|i| i as f64).collect()));
        let y = ctx.rope(x, &[0, 0], 2, 10000.0);
        assert_eq!(ctx.value(x).data, ctx.value(y).data);
    }
}
