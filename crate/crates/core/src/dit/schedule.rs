//! Noise construction and the denoising time shift.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::nn::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    /// One K x D draw replicated across all frames.
    Shared,
    /// Independent draw per frame.
    Independent,
}

impl std::str::FromStr for NoiseMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shared" => Ok(NoiseMode::Shared),
            "independent" => Ok(NoiseMode::Independent),
            other => Err(Error::invalid(format!("unknown noise mode '{other}'"))),
        }
    }
}

/// T frames of standard-normal K x D noise under the given replication mode.
pub fn shared_noise(frames: usize, k: usize, d: usize, seed: u64, mode: NoiseMode) -> Vec<Tensor> {
    let mut rng = crate::rng::stream(seed, 0x6e6f69);
    let draw = |rng: &mut crate::rng::Rng| {
        Tensor::new(
            vec![k, d],
            (0..k * d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
        )
    };
    match mode {
        NoiseMode::Shared => {
            let one = draw(&mut rng);
            vec![one; frames]
        }
        NoiseMode::Independent => (0..frames).map(|_| draw(&mut rng)).collect(),
    }
}

/// Monotone bijection of the denoising time axis:
/// `t' = s*t / (1 + (s-1)*t)`. Identity at s = 1, endpoints fixed.
pub fn time_shift(t: f64, s: f64) -> Result<f64> {
    if s < 1.0 {
        return Err(Error::invalid("time shift factor must be at least 1"));
    }
    Ok(s * t / (1.0 + (s - 1.0) * t))
}

/// Inverse of [`time_shift`] in t.
pub fn time_shift_inverse(t: f64, s: f64) -> Result<f64> {
    // t = s*u/(1+(s-1)u)  =>  u = t / (s - (s-1) t).
    if s < 1.0 {
        return Err(Error::invalid("time shift factor must be at least 1"));
    }
    Ok(t / (s - (s - 1.0) * t))
}
