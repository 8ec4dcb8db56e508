//! Adam optimizer over a [`ParamStore`].

use super::params::ParamStore;
use super::tensor::Tensor;

pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64) -> Self {
        let m = store.ids().map(|id| vec![0.0; store.value(id).len()]).collect();
        let v = store.ids().map(|id| vec![0.0; store.value(id).len()]).collect();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m,
            v,
            step: 0,
        }
    }

    /// One update; frozen parameters are skipped (and asserted untouched by
    /// the gradient pass).
    pub fn step(&mut self, store: &mut ParamStore, grads: &[Tensor]) {
        assert_eq!(grads.len(), store.len());
        self.step += 1;
        let b1c = 1.0 - self.beta1.powi(self.step as i32);
        let b2c = 1.0 - self.beta2.powi(self.step as i32);
        for id in store.ids() {
            if store.is_frozen(id) {
                assert!(
                    grads[id.0].data.iter().all(|&g| g == 0.0),
                    "gradient reached frozen parameter {}",
                    store.name(id)
                );
                continue;
            }
            let m = &mut self.m[id.0];
            let v = &mut self.v[id.0];
            let p = store.value_mut(id);
            for ((pv, g), (mv, vv)) in p
                .data
                .iter_mut()
                .zip(&grads[id.0].data)
                .zip(m.iter_mut().zip(v.iter_mut()))
            {
                *mv = self.beta1 * *mv + (1.0 - self.beta1) * g;
                *vv = self.beta2 * *vv + (1.0 - self.beta2) * g * g;
                let mh = *mv / b1c;
                let vh = *vv / b2c;
                *pv -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
    }
}
