//! Silhouette patch encoder: the conditioning-token stand-in for a large
//! pretrained image embedder, trained jointly with the base model.

use crate::data::SilhouetteImage;
use crate::nn::layers::{Linear, TransformerBlock};
use crate::nn::{Ctx, ParamStore, Tensor, Var};
use crate::rng::Rng;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct CondEncoder {
    pub resolution: usize,
    pub patch: usize,
    patch_embed: Linear,
    pos_embed: crate::nn::ParamId,
    blocks: Vec<TransformerBlock>,
}

impl CondEncoder {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        resolution: usize,
        patch: usize,
        width: usize,
        heads: usize,
        blocks: usize,
        rng: &mut Rng,
    ) -> Self {
        let side = resolution / patch;
        let tokens = side * side;
        CondEncoder {
            resolution,
            patch,
            patch_embed: Linear::new(store, &format!("{name}.patch"), patch * patch, width, rng),
            pos_embed: store.add_zeros(format!("{name}.pos"), &[tokens, width]),
            blocks: (0..blocks)
                .map(|i| TransformerBlock::new(store, &format!("{name}.block{i}"), width, heads, rng))
                .collect(),
        }
    }

    /// Non-overlapping patch rows of the coverage image.
    pub fn patches(&self, image: &SilhouetteImage) -> Result<Tensor> {
        if image.resolution != self.resolution {
            return Err(Error::ShapeMismatch(format!(
                "condition image resolution {} vs encoder {}",
                image.resolution, self.resolution
            )));
        }
        let side = self.resolution / self.patch;
        let p = self.patch;
        let mut data = Vec::with_capacity(side * side * p * p);
        for py in 0..side {
            for px in 0..side {
                for y in 0..p {
                    for x in 0..p {
                        data.push(image.values[(py * p + y) * self.resolution + px * p + x]);
                    }
                }
            }
        }
        Ok(Tensor::new(vec![side * side, p * p], data))
    }

    /// Condition tokens [C, width] for one frame.
    pub fn forward(&self, ctx: &mut Ctx, store: &ParamStore, image: &SilhouetteImage) -> Result<Var> {
        let patches = self.patches(image)?;
        let x = ctx.constant(patches);
        let mut h = self.patch_embed.forward(ctx, store, x);
        let pos = ctx.param(store, self.pos_embed);
        h = ctx.add(h, pos);
        for b in &self.blocks {
            h = b.forward(ctx, store, h);
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::camera::CameraPose6;

    fn image(res: usize) -> SilhouetteImage {
        SilhouetteImage {
            resolution: res,
            values: (0..res * res).map(|i| (i % 7) as f64 / 7.0).collect(),
            camera: CameraPose6 {
                yaw: 0.0,
                pitch: 0.0,
                radius: 2.0,
                lookat: [0.0; 3],
            },
        }
    }

    #[test]
    fn token_count_matches_patch_grid() {
        let mut store = ParamStore::new();
        let mut rng = crate::rng::rng(0);
        let enc = CondEncoder::new(&mut store, "c", 16, 4, 24, 4, 1, &mut rng);
        let mut ctx = Ctx::inference();
        let out = enc.forward(&mut ctx, &store, &image(16)).unwrap();
        assert_eq!(ctx.value(out).shape, vec![16, 24]);
        assert!(enc.forward(&mut ctx, &store, &image(8)).is_err());
    }

    #[test]
    fn patches_preserve_values() {
        let mut store = ParamStore::new();
        let mut rng = crate::rng::rng(0);
        let enc = CondEncoder::new(&mut store, "c", 8, 4, 16, 2, 1, &mut rng);
        let img = image(8);
        let p = enc.patches(&img).unwrap();
        // First patch, first row holds the image's first four values.
        assert_eq!(&p.data[0..4], &img.values[0..4]);
        // Second patch starts at column 4.
        assert_eq!(p.data[16], img.values[4]);
    }
}
