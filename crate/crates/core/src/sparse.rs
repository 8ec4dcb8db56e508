//! Compressed sparse row matrices and a conjugate-gradient solver, used by
//! the ARAP global step.

#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<u32>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row (column, value) lists; columns need not be sorted.
    pub fn from_rows(rows: &[Vec<(u32, f64)>]) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in rows {
            let mut entries: Vec<(u32, f64)> = row.clone();
            entries.sort_unstable_by_key(|e| e.0);
            for (c, v) in entries {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(out.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k] as usize];
            }
            out[i] = acc;
        }
    }
}

/// Conjugate gradients for SPD systems. Starts from `x` (warm start) and
/// monotonically decreases the quadratic objective, which the ARAP energy
/// descent argument leans on.
pub fn conjugate_gradient(a: &CsrMatrix, b: &[f64], x: &mut [f64], tol: f64, max_iters: usize) -> usize {
    let n = a.n;
    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    a.matvec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut p = r.clone();
    let mut rs = dot(&r, &r);
    let b_norm = dot(b, b).sqrt().max(1e-300);
    for it in 0..max_iters {
        if rs.sqrt() <= tol * b_norm {
            return it;
        }
        a.matvec(&p, &mut ap);
        let denom = dot(&p, &ap);
        if denom <= 0.0 {
            return it;
        }
        let alpha = rs / denom;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new = dot(&r, &r);
        let beta = rs_new / rs;
        rs = rs_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    max_iters
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_spd_system() {
        let a = CsrMatrix::from_rows(&[
            vec![(0, 4.0), (1, 1.0)],
            vec![(0, 1.0), (1, 3.0), (2, 1.0)],
            vec![(1, 1.0), (2, 2.0)],
        ]);
        let b = [1.0, 2.0, 3.0];
        let mut x = vec![0.0; 3];
        conjugate_gradient(&a, &b, &mut x, 1e-12, 100);
        let mut ax = vec![0.0; 3];
        a.matvec(&x, &mut ax);
        for (u, v) in ax.iter().zip(&b) {
            assert!((u - v).abs() < 1e-9);
        }
    }
}
