//! Named parameter storage with freeze flags, checkpoints, and hashing.

use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub frozen: bool,
}

#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let name = name.into();
        assert!(
            self.params.iter().all(|p| p.name != name),
            "duplicate parameter name {name}"
        );
        self.params.push(Param {
            name,
            value,
            frozen: false,
        });
        ParamId(self.params.len() - 1)
    }

    /// Xavier-uniform weight matrix.
    pub fn add_xavier(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        rng: &mut crate::rng::Rng,
    ) -> ParamId {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
        self.add(name, Tensor::new(vec![rows, cols], data))
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, shape: &[usize]) -> ParamId {
        self.add(name, Tensor::zeros(shape))
    }

    pub fn add_ones(&mut self, name: impl Into<String>, shape: &[usize]) -> ParamId {
        let n: usize = shape.iter().product();
        self.add(name, Tensor::new(shape.to_vec(), vec![1.0; n]))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn is_frozen(&self, id: ParamId) -> bool {
        self.params[id.0].frozen
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    /// Freezes every parameter whose name starts with `prefix`.
    pub fn freeze_prefix(&mut self, prefix: &str) -> usize {
        let mut n = 0;
        for p in &mut self.params {
            if p.name.starts_with(prefix) {
                p.frozen = true;
                n += 1;
            }
        }
        n
    }

    pub fn trainable_count(&self) -> usize {
        self.params.iter().filter(|p| !p.frozen).count()
    }

    pub fn total_elements(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// FNV-1a hash over the exact bit patterns of the selected parameters,
    /// in parameter order. Used by the freeze contract.
    pub fn hash_matching(&self, predicate: impl Fn(&str) -> bool) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for p in &self.params {
            if !predicate(&p.name) {
                continue;
            }
            for &v in &p.value.data {
                for b in v.to_bits().to_le_bytes() {
                    h ^= b as u64;
                    h = h.wrapping_mul(0x100_0000_01b3);
                }
            }
        }
        h
    }

    pub fn hash_all(&self) -> u64 {
        self.hash_matching(|_| true)
    }

    /// Writes all parameters into `dir` as one rank-1 TNSR blob plus a JSON
    /// index mapping names to shapes and offsets.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut flat = Vec::with_capacity(self.total_elements());
        let mut index = Vec::new();
        for p in &self.params {
            index.push(ParamRecord {
                name: p.name.clone(),
                shape: p.value.shape.clone(),
                offset: flat.len(),
                frozen: p.frozen,
            });
            flat.extend_from_slice(&p.value.data);
        }
        crate::blob::write_blob(&dir.join("weights.tnsr"), &[flat.len()], &flat)?;
        let json = serde_json::to_string_pretty(&index)?;
        std::fs::write(dir.join("weights_index.json"), json)?;
        Ok(())
    }

    /// Loads parameters saved by [`save`]; the store layout (names, shapes,
    /// order) must match.
    pub fn load(&mut self, dir: &Path) -> Result<()> {
        let index: Vec<ParamRecord> =
            serde_json::from_str(&std::fs::read_to_string(dir.join("weights_index.json"))?)?;
        let (_, flat) = crate::blob::read_blob(&dir.join("weights.tnsr"))?;
        if index.len() != self.params.len() {
            return Err(Error::ShapeMismatch(format!(
                "checkpoint has {} params, store has {}",
                index.len(),
                self.params.len()
            )));
        }
        for (p, rec) in self.params.iter_mut().zip(&index) {
            if p.name != rec.name || p.value.shape != rec.shape {
                return Err(Error::ShapeMismatch(format!(
                    "checkpoint param {} {:?} vs store {} {:?}",
                    rec.name, rec.shape, p.name, p.value.shape
                )));
            }
            let n = p.value.len();
            p.value.data.copy_from_slice(&flat[rec.offset..rec.offset + n]);
            p.frozen = rec.frozen;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct ParamRecord {
    name: String,
    shape: Vec<usize>,
    offset: usize,
    frozen: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn freeze_and_hash() {
        let mut store = ParamStore::new();
        let mut rng = crate::rng::rng(0);
        store.add_xavier("base.w", 4, 4, &mut rng);
        store.add_xavier("temporal.w", 4, 4, &mut rng);
        assert_eq!(store.freeze_prefix("base."), 1);
        assert_eq!(store.trainable_count(), 1);
        let h = store.hash_matching(|n| n.starts_with("base."));
        store.value_mut(ParamId(1)).data[0] += 1.0;
        assert_eq!(h, store.hash_matching(|n| n.starts_with("base.")));
        store.value_mut(ParamId(0)).data[0] += 1.0;
        assert_ne!(h, store.hash_matching(|n| n.starts_with("base.")));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = std::env::temp_dir().join("params_rt");
        let _ = std::fs::remove_dir_all(&dir);
        let mut store = ParamStore::new();
        let mut rng = crate::rng::rng(1);
        store.add_xavier("a", 3, 5, &mut rng);
        store.add_zeros("b", &[7]);
        store.freeze_prefix("a");
        store.save(&dir).unwrap();
        let mut other = ParamStore::new();
        let mut rng2 = crate::rng::rng(99);
        other.add_xavier("a", 3, 5, &mut rng2);
        other.add_zeros("b", &[7]);
        other.load(&dir).unwrap();
        assert!(other.is_frozen(ParamId(0)));
        // f32 storage: values match to f32 precision.
        for (x, y) in store.value(ParamId(0)).data.iter().zip(&other.value(ParamId(0)).data) {
            assert!((x - y).abs() < 1e-6);
        }
    }
}
