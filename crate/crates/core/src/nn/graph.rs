//! Reverse-mode autodiff tape over f64 tensors.
//!
//! A [`Ctx`] records one forward pass; [`Ctx::backward`] walks the tape in
//! reverse creation order, so gradient accumulation order is deterministic.
//! Frozen parameters enter the graph as constants and never receive
//! gradients. Attention is a fused op that streams over query chunks and
//! recomputes its softmax in the backward pass, keeping memory independent
//! of the full logits matrix.

use super::params::{ParamId, ParamStore};
use super::tensor::{matmul, matmul_nt, matmul_tn, Tensor};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Attention masking patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttnMask {
    Full,
    /// 1D temporal attention: token i of one frame attends only to token i
    /// of every frame (no same-frame interactions).
    SameIndexAcrossFrames { tokens_per_frame: usize },
}

impl AttnMask {
    #[inline]
    fn allowed(&self, qi: usize, ki: usize) -> bool {
        match *self {
            AttnMask::Full => true,
            AttnMask::SameIndexAcrossFrames { tokens_per_frame } => {
                // The temporal sequence of one token index: same within-frame
                // index in any frame, never other tokens of the same frame.
                qi % tokens_per_frame == ki % tokens_per_frame
            }
        }
    }
}

type BackwardFn = Box<dyn Fn(&[Node], &Tensor, &mut [Option<Tensor>])>;

struct Node {
    value: Tensor,
    requires_grad: bool,
    param: Option<ParamId>,
    backward: Option<BackwardFn>,
}

#[derive(Default)]
pub struct Ctx {
    nodes: Vec<Node>,
    grad_enabled: bool,
}

fn acc(slot: &mut Option<Tensor>, delta: Tensor) {
    match slot {
        Some(g) => {
            debug_assert_eq!(g.shape, delta.shape);
            for (a, b) in g.data.iter_mut().zip(&delta.data) {
                *a += b;
            }
        }
        None => *slot = Some(delta),
    }
}

impl Ctx {
    pub fn train() -> Self {
        Ctx {
            nodes: Vec::new(),
            grad_enabled: true,
        }
    }

    pub fn inference() -> Self {
        Ctx {
            nodes: Vec::new(),
            grad_enabled: false,
        }
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(
        &mut self,
        value: Tensor,
        requires: bool,
        backward: Option<BackwardFn>,
        param: Option<ParamId>,
    ) -> Var {
        let requires = requires && self.grad_enabled;
        self.nodes.push(Node {
            value,
            requires_grad: requires,
            param,
            backward: if requires { backward } else { None },
        });
        Var(self.nodes.len() - 1)
    }

    fn requires(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, false, None, None)
    }

    /// Leaf for a parameter; frozen parameters become constants.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        let frozen = store.is_frozen(id);
        self.push(store.value(id).clone(), !frozen, None, Some(id))
    }

    // ---- elementwise ----

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let t = {
            let (ta, tb) = (self.value(a), self.value(b));
            assert_eq!(ta.shape, tb.shape, "add shapes");
            let mut out = ta.clone();
            for (x, y) in out.data.iter_mut().zip(&tb.data) {
                *x += y;
            }
            out
        };
        let req = self.requires(a) || self.requires(b);
        let (ia, ib) = (a.0, b.0);
        self.push(
            t,
            req,
            Some(Box::new(move |_n, g, grads| {
                acc(&mut grads[ia], g.clone());
                acc(&mut grads[ib], g.clone());
            })),
            None,
        )
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let t = {
            let (ta, tb) = (self.value(a), self.value(b));
            assert_eq!(ta.shape, tb.shape, "sub shapes");
            let mut out = ta.clone();
            for (x, y) in out.data.iter_mut().zip(&tb.data) {
                *x -= y;
            }
            out
        };
        let req = self.requires(a) || self.requires(b);
        let (ia, ib) = (a.0, b.0);
        self.push(
            t,
            req,
            Some(Box::new(move |_n, g, grads| {
                acc(&mut grads[ia], g.clone());
                let mut neg = g.clone();
                for v in neg.data.iter_mut() {
                    *v = -*v;
                }
                acc(&mut grads[ib], neg);
            })),
            None,
        )
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let t = {
            let (ta, tb) = (self.value(a), self.value(b));
            assert_eq!(ta.shape, tb.shape, "mul shapes");
            let mut out = ta.clone();
            for (x, y) in out.data.iter_mut().zip(&tb.data) {
                *x *= y;
            }
            out
        };
        let req = self.requires(a) || self.requires(b);
        let (ia, ib) = (a.0, b.0);
        self.push(
            t,
            req,
            Some(Box::new(move |n, g, grads| {
                let mut da = g.clone();
                for (x, y) in da.data.iter_mut().zip(&n[ib].value.data) {
                    *x *= y;
                }
                acc(&mut grads[ia], da);
                let mut db = g.clone();
                for (x, y) in db.data.iter_mut().zip(&n[ia].value.data) {
                    *x *= y;
                }
                acc(&mut grads[ib], db);
            })),
            None,
        )
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let t = self.value(a).map(|v| v * c);
        let req = self.requires(a);
        let ia = a.0;
        self.push(
            t,
            req,
            Some(Box::new(move |_n, g, grads| {
                let mut da = g.clone();
                for v in da.data.iter_mut() {
                    *v *= c;
                }
                acc(&mut grads[ia], da);
            })),
            None,
        )
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let t = self.value(a).map(f64::exp);
        let req = self.requires(a);
        let ia = a.0;
        let saved = t.clone();
        self.push(
            t,
            req,
            Some(Box::new(move |_n, g, grads| {
                let mut da = g.clone();
                for (x, y) in da.data.iter_mut().zip(&saved.data) {
                    *x *= y;
                }
                acc(&mut grads[ia], da);
            })),
            None,
        )
    }

    pub fn square(&mut self, a: Var) -> Var {
        let t = self.value(a).map(|v| v * v);
        let req = self.requires(a);
        let ia = a.0;
        self.push(
            t,
            req,
            Some(Box::new(move |n, g, grads| {
                let mut da = g.clone();
                for (x, y) in da.data.iter_mut().zip(&n[ia].value.data) {
                    *x *= 2.0 * y;
                }
                acc(&mut grads[ia], da);
            })),
            None,
        )
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        const C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
        const A3: f64 = 0.044715;
        let t = self.value(a).map(|x| {
            let u = C * (x + A3 * x * x * x);
            0.5 * x * (1.0 + u.tanh())
        });
        let req = self.requires(a);
        let ia = a.0;
        self.push(
            t,
            req,
            Some(Box::new(move |n, g, grads| {
                let mut da = g.clone();
                for (d, &x) in da.data.iter_mut().zip(&n[ia].value.data) {
                    let u = C * (x + A3 * x * x * x);
                    let th = u.tanh();
                    let du = C * (1.0 + 3.0 * A3 * x * x);
                    *d *= 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du;
                }
                acc(&mut grads[ia], da);
            })),
            None,
        )
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let t = self.value(a).map(f64::tanh);
        let req = self.requires(a);
        let ia = a.0;
        let saved = t.clone();
        self.push(
            t,
            req,
            Some(Box::new(move |_n, g, grads| {
                let mut da = g.clone();
                for (x, y) in da.data.iter_mut().zip(&saved.data) {
                    *x *= 1.0 - y * y;
                }
                acc(&mut grads[ia], da);
            })),
            None,
        )
    }

    pub fn silu(&mut self, a: Var) -> Var {
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        let t = self.value(a).map(|x| x * sig(x));
        let req = self.requires(a);
        let ia = a.0;
        self.push(
            t,
            req,
            Some(Box::new(move |n, g, grads| {
                let mut da = g.clone();
                for (d, &x) in da.data.iter_mut().zip(&n[ia].value.data) {
                    let s = sig(x);
                    *d *= s * (1.0 + x * (1.0 - s));
                }
                acc(&mut grads[ia], da);
            })),
            None,
        )
    }

    // ---- matrix ----

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let t = matmul(self.value(a), self.value(b));
        let req = self.requires(a) || self.requires(b);
        let (ia, ib) = (a.0, b.0);
        self.push(
            t,
            req,
            Some(Box::new(move |n, g, grads| {
                // dA = g * B^T; dB = A^T * g
                acc(&mut grads[ia], matmul_nt(g, &n[ib].value));
                acc(&mut grads[ib], matmul_tn(&n[ia].value, g));
            })),
            None,
        )
    }

    /// x [n,d] + bias [d] broadcast over rows.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Var {
        let t = {
            let (tx, tb) = (self.value(x), self.value(b));
            let d = tx.cols();
            assert_eq!(tb.len(), d, "bias length");
            let mut out = tx.clone();
            for row in out.data.chunks_mut(d) {
                for (v, &bb) in row.iter_mut().zip(&tb.data) {
                    *v += bb;
                }
            }
            out
        };
        let req = self.requires(x) || self.requires(b);
        let (ix, ib) = (x.0, b.0);
        self.push(
            t,
            req,
            Some(Box::new(move |n, g, grads| {
                acc(&mut grads[ix], g.clone());
                let d = n[ib].value.len();
                let mut db = Tensor::zeros(&n[ib].value.shape.clone());
                for row in g.data.chunks(d) {
                    for (s, &v) in db.data.iter_mut().zip(row) {
                        *s += v;
                    }
                }
                acc(&mut grads[ib], db);
            })),
            None,
        )
    }

    /// x [n,d] * (1 + scale[d]) + shift[d], the adaptive modulation form.
    pub fn affine_rows(&mut self, x: Var, scale: Var, shift: Var) -> Var {
        let t = {
            let (tx, ts, th) = (self.value(x), self.value(scale), self.value(shift));
            let d = tx.cols();
            assert_eq!(ts.len(), d);
            assert_eq!(th.len(), d);
            let mut out = tx.clone();
            for row in out.data.chunks_mut(d) {
                for ((v, &s), &h) in row.iter_mut().zip(&ts.data).zip(&th.data) {
                    *v = *v * (1.0 + s) + h;
                }
            }
            out
        };
        let req = self.requires(x) || self.requires(scale) || self.requires(shift);
        let (ix, is, ih) = (x.0, scale.0, shift.0);
        self.push(
            t,
            req,
            Some(Box::new(move |n, g, grads| {
                let d = n[is].value.len();
                let ts = &n[is].value;
                let tx = &n[ix].value;
                let mut dx = g.clone();
                for row in dx.data.chunks_mut(d) {
                    for (v, &s) in row.iter_mut().zip(&ts.data) {
                        *v *= 1.0 + s;
                    }
                }
                acc(&mut grads[ix], dx);
                let mut ds = Tensor::zeros(&ts.shape.clone());
                let mut dh = Tensor::zeros(&ts.shape.clone());
                for (grow, xrow) in g.data.chunks(d).zip(tx.data.chunks(d)) {
                    for j in 0..d {
                        ds.data[j] += grow[j] * xrow[j];
                        dh.data[j] += grow[j];
                    }
                }
                acc(&mut grads[is], ds);
                acc(&mut grads[ih], dh);
            })),
            None,
        )
    }

    /// x [n,d] * gate[d] broadcast over rows.
    pub fn gate_rows(&mut self, x: Var, gate: Var) -> Var {
        let t = {
            let (tx, tg) = (self.value(x), self.value(gate));
            let d = tx.cols();
            assert_eq!(tg.len(), d);
            let mut out = tx.clone();
            for row in out.data.chunks_mut(d) {
                for (v, &gg) in row.iter_mut().zip(&tg.data) {
                    *v *= gg;
                }
            }
            out
        };
        let req = self.requires(x) || self.requires(gate);
        let (ix, ig) = (x.0, gate.0);
        self.push(
            t,
            req,
            Some(Box::new(move |n, g, grads| {
                let d = n[ig].value.len();
                let tg = &n[ig].value;
                let tx = &n[ix].value;
                let mut dx = g.clone();
                for row in dx.data.chunks_mut(d) {
                    for (v, &gg) in row.iter_mut().zip(&tg.data) {
                        *v *= gg;
                    }
                }
                acc(&mut grads[ix], dx);
                let mut dg = Tensor::zeros(&tg.shape.clone());
                for (grow, xrow) in g.data.chunks(d).zip(tx.data.chunks(d)) {
                    for j in 0..d {
                        dg.data[j] += grow[j] * xrow[j];
                    }
                }
                acc(&mut grads[ig], dg);
            })),
            None,
        )
    }

    /// Row-wise layer normalization without learned affine (eps 1e-5).
    pub fn layer_norm(&mut self, x: Var) -> Var {
        const EPS: f64 = 1e-5;
        let (t, xhat, inv_sigma) = {
            let tx = self.value(x);
            let d = tx.cols();
            let n = tx.rows();
            let mut out = tx.clone();
            let mut xhat = vec![0.0; n * d];
            let mut inv_sigma = vec![0.0; n];
            for (i, row) in out.data.chunks_mut(d).enumerate() {
                let mean = row.iter().sum::<f64>() / d as f64;
                let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
                let inv = 1.0 / (var + EPS).sqrt();
                inv_sigma[i] = inv;
                for (j, v) in row.iter_mut().enumerate() {
                    *v = (*v - mean) * inv;
                    xhat[i * d + j] = *v;
                }
            }
            (out, xhat, inv_sigma)
        };
        let req = self.requires(x);
        let ix = x.0;
        self.push(
            t,
            req,
            Some(Box::new(move |n, g, grads| {
                let d = n[ix].value.cols();
                let mut dx = Tensor::zeros(&n[ix].value.shape.clone());
                for (i, (grow, dxrow)) in g
                    .data
                    .chunks(d)
                    .zip(dx.data.chunks_mut(d))
                    .enumerate()
                {
                    let xh = &xhat[i * d..(i + 1) * d];
                    let mean_g = grow.iter().sum::<f64>() / d as f64;
                    let mean_gx = grow.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / d as f64;
                    for j in 0..d {
                        dxrow[j] = inv_sigma[i] * (grow[j] - mean_g - xh[j] * mean_gx);
                    }
                }
                acc(&mut grads[ix], dx);
            })),
            None,
        )
    }

    // ---- shape ----

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let d = self.value(parts[0]).cols();
        let mut data = Vec::new();
        let mut splits = Vec::with_capacity(parts.len());
        for &p in parts {
            let t = self.value(p);
            assert_eq!(t.cols(), d, "concat_rows widths");
            splits.push(t.rows());
            data.extend_from_slice(&t.data);
        }
        let n: usize = splits.iter().sum();
        let t = Tensor::new(vec![n, d], data);
        let req = parts.iter().any(|&p| self.requires(p));
        let ids: Vec<usize> = parts.iter().map(|p| p.0).collect();
        self.push(
            t,
            req,
            Some(Box::new(move |_n, g, grads| {
                let mut row = 0usize;
                for (&id, &rows) in ids.iter().zip(&splits) {
                    let part = Tensor::new(
                        vec![rows, d],
                        g.data[row * d..(row + rows) * d].to_vec(),
                    );
                    acc(&mut grads[id], part);
                    row += rows;
                }
            })),
            None,
        )
    }

    pub fn slice_rows(&mut self, x: Var, lo: usize, hi: usize) -> Var {
        let (t, total) = {
            let tx = self.value(x);
            let d = tx.cols();
            assert!(lo <= hi && hi <= tx.rows());
            (
                Tensor::new(vec![hi - lo, d], tx.data[lo * d..hi * d].to_vec()),
                tx.rows(),
            )
        };
        let req = self.requires(x);
        let ix = x.0;
        let d = t.cols();
        self.push(
            t,
            req,
            Some(Box::new(move |_n, g, grads| {
                let mut dx = Tensor::zeros(&[total, d]);
                dx.data[lo * d..hi * d].copy_from_slice(&g.data);
                acc(&mut grads[ix], dx);
            })),
            None,
        )
    }

    pub fn slice_cols(&mut self, x: Var, lo: usize, hi: usize) -> Var {
        let (t, rows, cols) = {
            let tx = self.value(x);
            let (n, d) = (tx.rows(), tx.cols());
            assert!(lo <= hi && hi <= d);
            let mut data = Vec::with_capacity(n * (hi - lo));
            for row in tx.data.chunks(d) {
                data.extend_from_slice(&row[lo..hi]);
            }
            (Tensor::new(vec![n, hi - lo], data), n, d)
        };
        let req = self.requires(x);
        let ix = x.0;
        self.push(
            t,
            req,
            Some(Box::new(move |_n, g, grads| {
                let w = hi - lo;
                let mut dx = Tensor::zeros(&[rows, cols]);
                for (i, row) in g.data.chunks(w).enumerate() {
                    dx.data[i * cols + lo..i * cols + hi].copy_from_slice(row);
                }
                acc(&mut grads[ix], dx);
            })),
            None,
        )
    }

    // ---- reductions & losses ----

    pub fn mean_all(&mut self, x: Var) -> Var {
        let (t, n) = {
            let tx = self.value(x);
            let n = tx.len();
            (Tensor::scalar(tx.data.iter().sum::<f64>() / n as f64), n)
        };
        let req = self.requires(x);
        let ix = x.0;
        self.push(
            t,
            req,
            Some(Box::new(move |nodes, g, grads| {
                let gv = g.item() / n as f64;
                let mut dx = nodes[ix].value.clone();
                for v in dx.data.iter_mut() {
                    *v = gv;
                }
                acc(&mut grads[ix], dx);
            })),
            None,
        )
    }

    /// Weighted sum of scalar vars plus a constant.
    pub fn combine_scalars(&mut self, terms: &[(Var, f64)], bias: f64) -> Var {
        let mut total = bias;
        for &(v, w) in terms {
            total += self.value(v).item() * w;
        }
        let req = terms.iter().any(|&(v, _)| self.requires(v));
        let saved: Vec<(usize, f64)> = terms.iter().map(|&(v, w)| (v.0, w)).collect();
        self.push(
            Tensor::scalar(total),
            req,
            Some(Box::new(move |_n, g, grads| {
                let gv = g.item();
                for &(id, w) in &saved {
                    acc(&mut grads[id], Tensor::scalar(gv * w));
                }
            })),
            None,
        )
    }

    /// Mean squared error against a constant target.
    pub fn mse_loss(&mut self, pred: Var, target: &Tensor) -> Var {
        let (t, n) = {
            let tp = self.value(pred);
            assert_eq!(tp.shape, target.shape, "mse shapes");
            let n = tp.len();
            let s: f64 = tp
                .data
                .iter()
                .zip(&target.data)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (Tensor::scalar(s / n as f64), n)
        };
        let req = self.requires(pred);
        let ip = pred.0;
        let target = target.clone();
        self.push(
            t,
            req,
            Some(Box::new(move |nodes, g, grads| {
                let gv = g.item() * 2.0 / n as f64;
                let mut dp = nodes[ip].value.clone();
                for (v, &tt) in dp.data.iter_mut().zip(&target.data) {
                    *v = gv * (*v - tt);
                }
                acc(&mut grads[ip], dp);
            })),
            None,
        )
    }

    /// Mean absolute error against a constant target.
    pub fn l1_loss(&mut self, pred: Var, target: &Tensor) -> Var {
        let (t, n) = {
            let tp = self.value(pred);
            assert_eq!(tp.shape, target.shape, "l1 shapes");
            let n = tp.len();
            let s: f64 = tp
                .data
                .iter()
                .zip(&target.data)
                .map(|(a, b)| (a - b).abs())
                .sum();
            (Tensor::scalar(s / n as f64), n)
        };
        let req = self.requires(pred);
        let ip = pred.0;
        let target = target.clone();
        self.push(
            t,
            req,
            Some(Box::new(move |nodes, g, grads| {
                let gv = g.item() / n as f64;
                let mut dp = nodes[ip].value.clone();
                for (v, &tt) in dp.data.iter_mut().zip(&target.data) {
                    *v = gv * (*v - tt).signum();
                }
                acc(&mut grads[ip], dp);
            })),
            None,
        )
    }

    // ---- attention ----

    /// Rotary position embedding: per head, consecutive pairs of channels
    /// rotate by `pos * base^(-2j/dh)`. Position index per row.
    pub fn rope(&mut self, x: Var, positions: &[usize], heads: usize, base: f64) -> Var {
        let t = {
            let tx = self.value(x);
            assert_eq!(tx.rows(), positions.len(), "rope positions");
            rope_apply(tx, positions, heads, base, false)
        };
        let req = self.requires(x);
        let ix = x.0;
        let positions = positions.to_vec();
        self.push(
            t,
            req,
            Some(Box::new(move |_n, g, grads| {
                // The rotation is orthogonal; the adjoint rotates backwards.
                acc(&mut grads[ix], rope_apply(g, &positions, heads, base, true));
            })),
            None,
        )
    }

    /// Fused multi-head scaled-dot-product attention.
    /// q: [nq, h*dh], k/v: [nkv, h*dh]. Softmax over keys per head with the
    /// given mask. Streams over query chunks; backward recomputes.
    pub fn sdpa(&mut self, q: Var, k: Var, v: Var, heads: usize, mask: AttnMask) -> Var {
        let t = {
            let (tq, tk, tv) = (self.value(q), self.value(k), self.value(v));
            sdpa_forward(tq, tk, tv, heads, mask)
        };
        let req = self.requires(q) || self.requires(k) || self.requires(v);
        let (iq, ik, iv) = (q.0, k.0, v.0);
        self.push(
            t,
            req,
            Some(Box::new(move |n, g, grads| {
                let (dq, dk, dv) =
                    sdpa_backward(&n[iq].value, &n[ik].value, &n[iv].value, g, heads, mask);
                acc(&mut grads[iq], dq);
                acc(&mut grads[ik], dk);
                acc(&mut grads[iv], dv);
            })),
            None,
        )
    }

    // ---- backward ----

    /// Backpropagates from scalar `loss`; returns per-parameter gradients in
    /// store order (zero tensors for parameters that got no gradient).
    pub fn backward(&mut self, loss: Var, store: &ParamStore) -> Vec<Tensor> {
        assert!(self.grad_enabled, "backward on an inference ctx");
        assert_eq!(self.value(loss).len(), 1, "loss must be scalar");
        let n = self.nodes.len();
        let mut grads: Vec<Option<Tensor>> = (0..n).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));
        for id in (0..=loss.0).rev() {
            if !self.nodes[id].requires_grad {
                grads[id] = None;
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            if let Some(back) = &self.nodes[id].backward {
                back(&self.nodes, &g, &mut grads);
            }
            if self.nodes[id].param.is_some() {
                grads[id] = Some(g);
            }
        }
        let mut out: Vec<Tensor> = store
            .ids()
            .map(|id| Tensor::zeros(&store.value(id).shape))
            .collect();
        for (id, node) in self.nodes.iter().enumerate() {
            if let (Some(pid), Some(g)) = (node.param, grads[id].take()) {
                for (a, b) in out[pid.0].data.iter_mut().zip(&g.data) {
                    *a += b;
                }
            }
        }
        out
    }
}

fn rope_apply(x: &Tensor, positions: &[usize], heads: usize, base: f64, inverse: bool) -> Tensor {
    let d = x.cols();
    assert_eq!(d % heads, 0);
    let dh = d / heads;
    assert_eq!(dh % 2, 0, "rope needs even head dim");
    let mut out = x.clone();
    for (i, row) in out.data.chunks_mut(d).enumerate() {
        let pos = positions[i] as f64;
        for h in 0..heads {
            let hrow = &mut row[h * dh..(h + 1) * dh];
            for j in 0..dh / 2 {
                let theta = pos / base.powf(2.0 * j as f64 / dh as f64);
                let (sin, cos) = if inverse {
                    ((-theta).sin(), (-theta).cos())
                } else {
                    (theta.sin(), theta.cos())
                };
                let a = hrow[2 * j];
                let b = hrow[2 * j + 1];
                hrow[2 * j] = a * cos - b * sin;
                hrow[2 * j + 1] = a * sin + b * cos;
            }
        }
    }
    out
}

const Q_CHUNK: usize = 64;
const NEG_INF: f64 = -1e30;

fn head_slice(t: &Tensor, h: usize, dh: usize) -> Tensor {
    let (n, d) = (t.rows(), t.cols());
    let mut data = Vec::with_capacity(n * dh);
    for row in t.data.chunks(d) {
        data.extend_from_slice(&row[h * dh..(h + 1) * dh]);
    }
    Tensor::new(vec![n, dh], data)
}

fn sdpa_forward(q: &Tensor, k: &Tensor, v: &Tensor, heads: usize, mask: AttnMask) -> Tensor {
    let (nq, d) = (q.rows(), q.cols());
    let nkv = k.rows();
    assert_eq!(k.cols(), d);
    assert_eq!(v.cols(), d);
    assert_eq!(d % heads, 0);
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut out = Tensor::zeros(&[nq, d]);
    for h in 0..heads {
        let qh = head_slice(q, h, dh);
        let kh = head_slice(k, h, dh);
        let vh = head_slice(v, h, dh);
        let chunks = nq.div_ceil(Q_CHUNK);
        let pieces: Vec<Vec<f64>> = par::map_indexed(chunks, |c| {
            let lo = c * Q_CHUNK;
            let hi = (lo + Q_CHUNK).min(nq);
            let mut piece = vec![0.0; (hi - lo) * dh];
            let mut logits = vec![0.0; nkv];
            for i in lo..hi {
                attention_row(
                    qh.row(i),
                    &kh,
                    &vh,
                    i,
                    scale,
                    mask,
                    &mut logits,
                    &mut piece[(i - lo) * dh..(i - lo + 1) * dh],
                );
            }
            piece
        });
        for (c, piece) in pieces.iter().enumerate() {
            let lo = c * Q_CHUNK;
            for (local, prow) in piece.chunks(dh).enumerate() {
                let i = lo + local;
                out.data[i * d + h * dh..i * d + (h + 1) * dh].copy_from_slice(prow);
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn attention_row(
    q_row: &[f64],
    kh: &Tensor,
    vh: &Tensor,
    qi: usize,
    scale: f64,
    mask: AttnMask,
    logits: &mut [f64],
    out_row: &mut [f64],
) {
    let nkv = kh.rows();
    let mut max_l = f64::NEG_INFINITY;
    for j in 0..nkv {
        let l = if mask.allowed(qi, j) {
            let mut acc = 0.0;
            for (a, b) in q_row.iter().zip(kh.row(j)) {
                acc += a * b;
            }
            acc * scale
        } else {
            NEG_INF
        };
        logits[j] = l;
        max_l = max_l.max(l);
    }
    let mut denom = 0.0;
    for l in logits.iter_mut() {
        *l = (*l - max_l).exp();
        denom += *l;
    }
    let inv = 1.0 / denom;
    out_row.fill(0.0);
    for j in 0..nkv {
        let a = logits[j] * inv;
        if a == 0.0 {
            continue;
        }
        for (o, &vv) in out_row.iter_mut().zip(vh.row(j)) {
            *o += a * vv;
        }
    }
}

fn sdpa_backward(
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    dout: &Tensor,
    heads: usize,
    mask: AttnMask,
) -> (Tensor, Tensor, Tensor) {
    let (nq, d) = (q.rows(), q.cols());
    let nkv = k.rows();
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut dq = Tensor::zeros(&[nq, d]);
    let mut dk = Tensor::zeros(&[nkv, d]);
    let mut dv = Tensor::zeros(&[nkv, d]);
    let mut attn = vec![0.0; nkv];
    for h in 0..heads {
        let qh = head_slice(q, h, dh);
        let kh = head_slice(k, h, dh);
        let vh = head_slice(v, h, dh);
        // Serial over queries; accumulation order is fixed.
        for i in 0..nq {
            let q_row = qh.row(i);
            // Recompute softmax row.
            let mut max_l = f64::NEG_INFINITY;
            for j in 0..nkv {
                let l = if mask.allowed(i, j) {
                    let mut acc = 0.0;
                    for (a, b) in q_row.iter().zip(kh.row(j)) {
                        acc += a * b;
                    }
                    acc * scale
                } else {
                    NEG_INF
                };
                attn[j] = l;
                max_l = max_l.max(l);
            }
            let mut denom = 0.0;
            for l in attn.iter_mut() {
                *l = (*l - max_l).exp();
                denom += *l;
            }
            let inv = 1.0 / denom;
            for l in attn.iter_mut() {
                *l *= inv;
            }
            let dout_row = &dout.data[i * d + h * dh..i * d + (h + 1) * dh];
            // dA_j = dout . v_j ; dlogit_j = a_j (dA_j - sum_m a_m dA_m)
            let mut sum_ada = 0.0;
            let mut da = vec![0.0; nkv];
            for j in 0..nkv {
                if attn[j] == 0.0 {
                    continue;
                }
                let mut acc = 0.0;
                for (a, b) in dout_row.iter().zip(vh.row(j)) {
                    acc += a * b;
                }
                da[j] = acc;
                sum_ada += attn[j] * acc;
            }
            for j in 0..nkv {
                let a = attn[j];
                if a == 0.0 {
                    continue;
                }
                let dlogit = a * (da[j] - sum_ada) * scale;
                // dq_i += dlogit * k_j ; dk_j += dlogit * q_i
                for (x, &kv) in dq.data[i * d + h * dh..i * d + (h + 1) * dh]
                    .iter_mut()
                    .zip(kh.row(j))
                {
                    *x += dlogit * kv;
                }
                for (x, &qv) in dk.data[j * d + h * dh..j * d + (h + 1) * dh]
                    .iter_mut()
                    .zip(q_row)
                {
                    *x += dlogit * qv;
                }
                // dv_j += a * dout_i
                for (x, &g) in dv.data[j * d + h * dh..j * d + (h + 1) * dh]
                    .iter_mut()
                    .zip(dout_row)
                {
                    *x += a * g;
                }
            }
        }
    }
    (dq, dk, dv)
}
