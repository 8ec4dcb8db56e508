//! Rectified-flow training for the base (per-frame) and temporal stages.

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::base::BaseModel;
use super::schedule::{shared_noise, time_shift, NoiseMode};
use super::temporal::SpatiotemporalModel;

use crate::data::SilhouetteImage;
use crate::nn::{Adam, Ctx, ParamStore, Tensor};
use crate::{Error, Result};

/// One per-frame training item: clean latents plus the conditioning view.
#[derive(Debug, Clone)]
pub struct BaseSample {
    pub latents: Tensor,
    pub condition: SilhouetteImage,
}

/// One sequence training item: per-frame clean latents plus views.
#[derive(Debug, Clone)]
pub struct SequenceSample {
    pub latents: Vec<Tensor>,
    pub conditions: Vec<SilhouetteImage>,
}

/// Draws the denoising time for a training step, through the training-time
/// shift (identity at shift 1).
fn draw_time(rng: &mut crate::rng::Rng, shift: f64) -> f64 {
    let u: f64 = rng.gen();
    time_shift(u, shift).expect("validated shift")
}

/// Linear path state z_t = (1-t) z0 + t z1 and the velocity target z1 - z0.
fn mix(z0: &Tensor, z1: &Tensor, t: f64) -> (Tensor, Tensor) {
    let mut zt = z1.clone();
    let mut target = z1.clone();
    for ((zt_v, tg), (a, b)) in zt
        .data
        .iter_mut()
        .zip(target.data.iter_mut())
        .zip(z0.data.iter().zip(&z1.data))
    {
        *zt_v = (1.0 - t) * a + t * b;
        *tg = b - a;
    }
    (zt, target)
}

#[derive(Debug, Clone)]
pub struct DitTrainReport {
    pub curve: Vec<(usize, f64)>,
    pub final_loss: f64,
}

/// Trains the per-frame base model with the rectified-flow objective
/// `|| v(z_t, t, cond) - (z1 - z0) ||^2`.
pub fn train_base(
    model: &BaseModel,
    store: &mut ParamStore,
    dataset: &[BaseSample],
    steps: usize,
    mut progress: impl FnMut(usize, f64),
) -> Result<DitTrainReport> {
    if dataset.is_empty() {
        return Err(Error::invalid("empty base training set"));
    }
    let config = model.config.clone();
    let mut adam = Adam::new(store, config.learning_rate);
    let mut rng = crate::rng::stream(config.seed, 0x62617365);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut cursor = order.len();
    let mut curve = Vec::new();
    let mut last = f64::NAN;
    for step in 0..steps {
        let warmup = 100.0;
        let ramp = ((step as f64 + 1.0) / warmup).min(1.0);
        adam.lr = config.learning_rate * ramp * (1.0 - 0.9 * step as f64 / steps.max(1) as f64);
        let mut grad_accum: Vec<Tensor> = store
            .ids()
            .map(|id| Tensor::zeros(&store.value(id).shape))
            .collect();
        let mut loss_sum = 0.0;
        for _ in 0..config.batch_size {
            if cursor >= order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let sample = &dataset[order[cursor]];
            cursor += 1;
            let t = draw_time(&mut rng, config.train_shift);
            let noise = shared_noise(
                1,
                config.latent_count,
                config.latent_dim,
                rng.gen(),
                NoiseMode::Independent,
            );
            let (zt, target) = mix(&noise[0], &sample.latents, t);
            let mut ctx = Ctx::train();
            let zv = ctx.constant(zt);
            let cond = model.embed_condition(&mut ctx, store, &sample.condition)?;
            let t_emb = model.embed_time(&mut ctx, store, t);
            let v = model.forward_frame(&mut ctx, store, zv, cond, t_emb);
            let loss = ctx.mse_loss(v, &target);
            let loss_val = ctx.value(loss).item();
            if !loss_val.is_finite() {
                return Err(Error::Diverged(format!("NaN base loss at step {step}")));
            }
            loss_sum += loss_val;
            let grads = ctx.backward(loss, store);
            for (a, g) in grad_accum.iter_mut().zip(&grads) {
                for (x, y) in a.data.iter_mut().zip(&g.data) {
                    *x += y / config.batch_size as f64;
                }
            }
        }
        adam.step(store, &grad_accum);
        last = loss_sum / config.batch_size as f64;
        if step % 50 == 0 || step + 1 == steps {
            curve.push((step, last));
            progress(step, last);
        }
    }
    Ok(DitTrainReport {
        curve,
        final_loss: last,
    })
}

/// Expected rectified-flow loss of a zero velocity field on this dataset:
/// mean(z1^2) + 1 integrated over t ~ U(0,1) ... the target (z1 - z0) has
/// per-element second moment mean(z1^2) + 1.
pub fn zero_velocity_loss(dataset: &[BaseSample]) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for s in dataset {
        for &v in &s.latents.data {
            sum += v * v;
            count += 1;
        }
    }
    sum / count as f64 + 1.0
}

/// Trains only the inserted spatiotemporal layers on latent sequences; base
/// parameters are frozen and asserted untouched.
pub fn train_temporal(
    model: &SpatiotemporalModel,
    store: &mut ParamStore,
    dataset: &[SequenceSample],
    steps: usize,
    mut progress: impl FnMut(usize, f64),
) -> Result<DitTrainReport> {
    if dataset.is_empty() {
        return Err(Error::invalid("empty sequence training set"));
    }
    let config = model.config().clone();
    let noise_mode = match config.ablation {
        super::Ablation::NoSharedNoise => NoiseMode::Independent,
        _ => config.noise_mode,
    };
    let mut adam = Adam::new(store, config.learning_rate);
    let mut rng = crate::rng::stream(config.seed, 0x74726e);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut cursor = order.len();
    let mut curve = Vec::new();
    let mut last = f64::NAN;
    for step in 0..steps {
        let warmup = 100.0;
        let ramp = ((step as f64 + 1.0) / warmup).min(1.0);
        adam.lr = config.learning_rate * ramp * (1.0 - 0.9 * step as f64 / steps.max(1) as f64);
        let mut grad_accum: Vec<Tensor> = store
            .ids()
            .map(|id| Tensor::zeros(&store.value(id).shape))
            .collect();
        let mut loss_sum = 0.0;
        for _ in 0..config.batch_size {
            if cursor >= order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let sample = &dataset[order[cursor]];
            cursor += 1;
            let frames = sample.latents.len();
            let t = draw_time(&mut rng, config.train_shift);
            let noise = shared_noise(
                frames,
                config.latent_count,
                config.latent_dim,
                rng.gen(),
                noise_mode,
            );
            let mut ctx = Ctx::train();
            let mut zvs = Vec::with_capacity(frames);
            let mut targets = Vec::with_capacity(frames);
            for f in 0..frames {
                let (zt, target) = mix(&noise[f], &sample.latents[f], t);
                zvs.push(ctx.constant(zt));
                targets.push(target);
            }
            let conds: Vec<&SilhouetteImage> = sample.conditions.iter().collect();
            let vs = model.forward_sequence(&mut ctx, store, &zvs, &conds, t)?;
            let per_frame: Vec<_> = vs
                .iter()
                .zip(&targets)
                .map(|(&v, tg)| ctx.mse_loss(v, tg))
                .collect();
            let terms: Vec<(crate::nn::Var, f64)> = per_frame
                .iter()
                .map(|&l| (l, 1.0 / frames as f64))
                .collect();
            let loss = ctx.combine_scalars(&terms, 0.0);
            let loss_val = ctx.value(loss).item();
            if !loss_val.is_finite() {
                return Err(Error::Diverged(format!("NaN temporal loss at step {step}")));
            }
            loss_sum += loss_val;
            let grads = ctx.backward(loss, store);
            for (a, g) in grad_accum.iter_mut().zip(&grads) {
                for (x, y) in a.data.iter_mut().zip(&g.data) {
                    *x += y / config.batch_size as f64;
                }
            }
        }
        adam.step(store, &grad_accum);
        last = loss_sum / config.batch_size as f64;
        if step % 50 == 0 || step + 1 == steps {
            curve.push((step, last));
            progress(step, last);
        }
    }
    Ok(DitTrainReport {
        curve,
        final_loss: last,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::camera::CameraPose6;
    use crate::dit::base::build_base;
    use crate::dit::temporal::insert_temporal_layers;
    use crate::dit::DitConfig;

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

    fn toy_base_dataset(config: &DitConfig, n: usize) -> Vec<BaseSample> {
        use rand::Rng;
        let mut rng = crate::rng::rng(7);
        (0..n)
            .map(|_| BaseSample {
                latents: Tensor::new(
                    vec![config.latent_count, config.latent_dim],
                    (0..config.latent_count * config.latent_dim)
                        .map(|_| rng.gen_range(-1.0..1.0))
                        .collect(),
                ),
                condition: image(config.cond_resolution, rng.gen_range(0.0..1.0)),
            })
            .collect()
    }

    #[test]
    fn initial_loss_matches_zero_velocity_expectation() {
        let config = DitConfig::micro();
        let mut store = ParamStore::new();
        let model = build_base(&config, &mut store).unwrap();
        let dataset = toy_base_dataset(&config, 8);
        let expect = zero_velocity_loss(&dataset);
        // Average the loss over many (t, z0) draws with the untrained model
        // (velocity identically zero from the zero-init head).
        let mut rng = crate::rng::rng(3);
        let mut total = 0.0;
        let draws = 64;
        for _ in 0..draws {
            use rand::Rng;
            let s = &dataset[rng.gen_range(0..dataset.len())];
            let t: f64 = rng.gen();
            let noise = shared_noise(1, config.latent_count, config.latent_dim, rng.gen(), NoiseMode::Independent);
            let (zt, target) = mix(&noise[0], &s.latents, t);
            let mut ctx = Ctx::inference();
            let zv = ctx.constant(zt);
            let cond = model.embed_condition(&mut ctx, &store, &s.condition).unwrap();
            let t_emb = model.embed_time(&mut ctx, &store, t);
            let v = model.forward_frame(&mut ctx, &store, zv, cond, t_emb);
            let diff: f64 = ctx
                .value(v)
                .data
                .iter()
                .zip(&target.data)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / target.data.len() as f64;
            total += diff;
        }
        let measured = total / draws as f64;
        assert!(
            (measured - expect).abs() / expect < 0.10,
            "init loss {measured} vs analytic {expect}"
        );
    }

    #[test]
    fn base_training_reduces_loss() {
        let mut config = DitConfig::micro();
        config.batch_size = 2;
        config.learning_rate = 2e-3;
        let mut store = ParamStore::new();
        let model = build_base(&config, &mut store).unwrap();
        let dataset = toy_base_dataset(&config, 2);
        let start = zero_velocity_loss(&dataset);
        let report = train_base(&model, &mut store, &dataset, 150, |_, _| {}).unwrap();
        assert!(
            report.final_loss < 0.7 * start,
            "loss {} vs start {start}",
            report.final_loss
        );
    }

    #[test]
    fn temporal_training_leaves_base_bitwise_unchanged() {
        let mut config = DitConfig::micro();
        config.batch_size = 1;
        let mut store = ParamStore::new();
        let base = build_base(&config, &mut store).unwrap();
        let model = insert_temporal_layers(base, &mut store).unwrap();
        let base_hash = store.hash_matching(|n| n.starts_with("base."));
        let dataset = vec![SequenceSample {
            latents: vec![
                Tensor::new(vec![config.latent_count, config.latent_dim], vec![0.3; 64]),
                Tensor::new(vec![config.latent_count, config.latent_dim], vec![-0.2; 64]),
            ],
            conditions: vec![image(config.cond_resolution, 0.2), image(config.cond_resolution, 0.7)],
        }];
        let report = train_temporal(&model, &mut store, &dataset, 30, |_, _| {}).unwrap();
        assert!(report.final_loss.is_finite());
        assert_eq!(
            base_hash,
            store.hash_matching(|n| n.starts_with("base.")),
            "frozen base weights changed"
        );
        // And the temporal weights did change.
        let any_nonzero = store
            .ids()
            .filter(|&id| store.name(id).contains(".wo."))
            .any(|id| store.value(id).data.iter().any(|&v| v != 0.0));
        assert!(any_nonzero, "temporal output projections never updated");
    }
}
