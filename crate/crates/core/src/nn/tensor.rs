//! Dense f64 tensors and the raw kernels behind the autodiff ops.
//!
//! Matrix kernels parallelize over fixed-size row chunks, so results are
//! bitwise identical for any thread count.

use crate::par;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "shape/data mismatch");
        Tensor { shape, data }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor {
            shape: vec![],
            data: vec![v],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let d = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut data = Vec::with_capacity(n * d);
        for r in rows {
            assert_eq!(r.len(), d);
            data.extend_from_slice(r);
        }
        Tensor {
            shape: vec![n, d],
            data,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> usize {
        assert_eq!(self.shape.len(), 2, "rows() needs a 2-d tensor");
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        assert_eq!(self.shape.len(), 2, "cols() needs a 2-d tensor");
        self.shape[1]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.cols();
        &self.data[i * d..(i + 1) * d]
    }

    pub fn item(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "item() needs a single element");
        self.data[0]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync + Send) -> Tensor {
        let mut out = self.clone();
        par::for_each_chunk_mut(&mut out.data, par::DEFAULT_CHUNK, |_, c| {
            for v in c {
                *v = f(*v);
            }
        });
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

const ROW_CHUNK: usize = 16;

/// C = A[m,k] * B[k,n]
pub fn matmul(a: &Tensor, b: &Tensor) -> Tensor {
    let (m, k) = (a.rows(), a.cols());
    let (kb, n) = (b.rows(), b.cols());
    assert_eq!(k, kb, "matmul inner dims {k} vs {kb}");
    let mut out = Tensor::zeros(&[m, n]);
    par::for_each_chunk_mut(&mut out.data, ROW_CHUNK * n, |ci, chunk| {
        let row0 = ci * ROW_CHUNK;
        for (local, out_row) in chunk.chunks_mut(n).enumerate() {
            let i = row0 + local;
            let a_row = &a.data[i * k..(i + 1) * k];
            for (kk, &aik) in a_row.iter().enumerate() {
                if aik == 0.0 {
                    continue;
                }
                let b_row = &b.data[kk * n..(kk + 1) * n];
                for (o, &bv) in out_row.iter_mut().zip(b_row) {
                    *o += aik * bv;
                }
            }
        }
    });
    out
}

/// C = A[m,k] * B[n,k]^T -> [m,n]
pub fn matmul_nt(a: &Tensor, b: &Tensor) -> Tensor {
    let (m, k) = (a.rows(), a.cols());
    let (n, kb) = (b.rows(), b.cols());
    assert_eq!(k, kb, "matmul_nt inner dims {k} vs {kb}");
    let mut out = Tensor::zeros(&[m, n]);
    par::for_each_chunk_mut(&mut out.data, ROW_CHUNK * n, |ci, chunk| {
        let row0 = ci * ROW_CHUNK;
        for (local, out_row) in chunk.chunks_mut(n).enumerate() {
            let i = row0 + local;
            let a_row = &a.data[i * k..(i + 1) * k];
            for (j, o) in out_row.iter_mut().enumerate() {
                let b_row = &b.data[j * k..(j + 1) * k];
                let mut acc = 0.0;
                for (&x, &y) in a_row.iter().zip(b_row) {
                    acc += x * y;
                }
                *o = acc;
            }
        }
    });
    out
}

/// C = A[m,k]^T * B[m,n] -> [k,n]
pub fn matmul_tn(a: &Tensor, b: &Tensor) -> Tensor {
    let (m, k) = (a.rows(), a.cols());
    let (mb, n) = (b.rows(), b.cols());
    assert_eq!(m, mb, "matmul_tn outer dims {m} vs {mb}");
    let mut out = Tensor::zeros(&[k, n]);
    par::for_each_chunk_mut(&mut out.data, ROW_CHUNK * n, |ci, chunk| {
        let row0 = ci * ROW_CHUNK;
        for (local, out_row) in chunk.chunks_mut(n).enumerate() {
            let r = row0 + local;
            for i in 0..m {
                let air = a.data[i * k + r];
                if air == 0.0 {
                    continue;
                }
                let b_row = &b.data[i * n..(i + 1) * n];
                for (o, &bv) in out_row.iter_mut().zip(b_row) {
                    *o += air * bv;
                }
            }
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_matmul(a: &Tensor, b: &Tensor) -> Tensor {
        let (m, k, n) = (a.rows(), a.cols(), b.cols());
        let mut out = Tensor::zeros(&[m, n]);
        for i in 0..m {
            for j in 0..n {
                let mut acc = 0.0;
                for kk in 0..k {
                    acc += a.data[i * k + kk] * b.data[kk * n + j];
                }
                out.data[i * n + j] = acc;
            }
        }
        out
    }

    fn rand_t(shape: &[usize], seed: u64) -> Tensor {
        use rand::Rng;
        let mut r = crate::rng::rng(seed);
        Tensor::new(
            shape.to_vec(),
            (0..shape.iter().product::<usize>())
                .map(|_| r.gen_range(-1.0..1.0))
                .collect(),
        )
    }

    #[test]
    fn matmul_matches_naive() {
        let a = rand_t(&[37, 11], 1);
        let b = rand_t(&[11, 23], 2);
        let fast = matmul(&a, &b);
        let slow = naive_matmul(&a, &b);
        for (x, y) in fast.data.iter().zip(&slow.data) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn transposed_variants_match() {
        let a = rand_t(&[19, 7], 3);
        let b = rand_t(&[13, 7], 4);
        // a * b^T
        let nt = matmul_nt(&a, &b);
        for i in 0..19 {
            for j in 0..13 {
                let mut acc = 0.0;
                for k in 0..7 {
                    acc += a.data[i * 7 + k] * b.data[j * 7 + k];
                }
                assert!((nt.data[i * 13 + j] - acc).abs() < 1e-12);
            }
        }
        // a^T * c
        let c = rand_t(&[19, 5], 5);
        let tn = matmul_tn(&a, &c);
        for r in 0..7 {
            for j in 0..5 {
                let mut acc = 0.0;
                for i in 0..19 {
                    acc += a.data[i * 7 + r] * c.data[i * 5 + j];
                }
                assert!((tn.data[r * 5 + j] - acc).abs() < 1e-12);
            }
        }
    }
}
