use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{apply_cfg, rescale_guidance, NoiseSchedule, Parameterization};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    #[default]
    Ddim,
    Ancestral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig<T> {
    pub kind: SamplerKind,
    pub num_inference_steps: usize,
    pub cfg_weight: T,
    pub cfg_rescale: T,
    pub eta: T,
    pub start_from_last: bool,
}

impl<T: Scalar> Default for SamplerConfig<T> {
    fn default() -> Self {
        Self {
            kind: SamplerKind::Ddim,
            num_inference_steps: 20,
            cfg_weight: T::of(7.5),
            cfg_rescale: T::of(0.7),
            eta: T::zero(),
            start_from_last: true,
        }
    }
}

impl<T: Scalar> SamplerConfig<T> {
    pub fn validate(&self, n_train_steps: usize) -> Result<()> {
        if self.num_inference_steps == 0 || self.num_inference_steps > n_train_steps {
            return Err(Error::Parameter(format!(
                "num_inference_steps must be in 1..={n_train_steps}, got {}",
                self.num_inference_steps
            )));
        }
        if !(self.cfg_weight >= T::zero()) {
            return Err(Error::Parameter("cfg_weight must be >= 0".into()));
        }
        if !(self.cfg_rescale >= T::zero() && self.cfg_rescale <= T::one()) {
            return Err(Error::Parameter("cfg_rescale must be in [0, 1]".into()));
        }
        if !(self.eta >= T::zero()) {
            return Err(Error::Parameter("eta must be >= 0".into()));
        }
        Ok(())
    }

    /// Strictly decreasing inference timesteps. Trailing spacing starts at `N`;
    /// otherwise the sequence ends at timestep 1.
    pub fn timesteps(&self, n_train_steps: usize) -> Result<Vec<usize>> {
        self.validate(n_train_steps)?;
        let k = self.num_inference_steps;
        let big_n = n_train_steps as f64;
        let steps: Vec<usize> = if self.start_from_last {
            (0..k)
                .map(|i| (big_n * (k - i) as f64 / k as f64).round() as usize)
                .collect()
        } else {
            let stride = n_train_steps / k;
            (0..k).map(|i| 1 + (k - 1 - i) * stride).collect()
        };
        debug_assert!(steps.windows(2).all(|w| w[0] > w[1]));
        Ok(steps)
    }
}

/// A conditional denoiser `x_n, n, c -> prediction`. `None` is the null condition.
pub trait Denoiser<T: Scalar> {
    fn parameterization(&self) -> Parameterization;

    fn data_dim(&self) -> usize;

    fn predict(&self, x_n: &[T], n: usize, condition: Option<usize>) -> Result<Vec<T>>;
}

fn guided_prediction<T: Scalar, D: Denoiser<T> + ?Sized>(
    model: &D,
    x: &[T],
    n: usize,
    condition: Option<usize>,
    config: &SamplerConfig<T>,
) -> Result<Vec<T>> {
    let cond = model.predict(x, n, condition)?;
    if config.cfg_weight == T::one() || condition.is_none() {
        return Ok(cond);
    }
    let uncond = model.predict(x, n, None)?;
    let guided = apply_cfg(&cond, &uncond, config.cfg_weight)?;
    rescale_guidance(&guided, &cond, config.cfg_rescale)
}

fn standard_normal<T: Scalar>(rng: &mut ChaCha8Rng, dim: usize) -> Vec<T> {
    (0..dim)
        .map(|_| T::of(StandardNormal.sample(rng)))
        .collect()
}

/// Draws one sample for `condition` by running the configured reverse process.
pub fn sample<T: Scalar, D: Denoiser<T> + ?Sized>(
    model: &D,
    condition: Option<usize>,
    config: &SamplerConfig<T>,
    schedule: &NoiseSchedule<T>,
    seed: u64,
) -> Result<Vec<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with_rng(model, condition, config, schedule, &mut rng)
}

/// Samples one item per condition. Item `i` uses stream `i` of the seeded
/// generator, so results do not depend on how the batch is partitioned.
pub fn sample_batch<T: Scalar, D: Denoiser<T> + ?Sized>(
    model: &D,
    conditions: &[Option<usize>],
    config: &SamplerConfig<T>,
    schedule: &NoiseSchedule<T>,
    seed: u64,
) -> Result<Vec<Vec<T>>> {
    conditions
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            sample_with_rng(model, c, config, schedule, &mut rng)
        })
        .collect()
}

fn sample_with_rng<T: Scalar, D: Denoiser<T> + ?Sized>(
    model: &D,
    condition: Option<usize>,
    config: &SamplerConfig<T>,
    schedule: &NoiseSchedule<T>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<T>> {
    let steps = config.timesteps(schedule.n_steps())?;
    let dim = model.data_dim();
    let kind = model.parameterization();
    let mut x: Vec<T> = standard_normal(rng, dim);
    for (i, &n) in steps.iter().enumerate() {
        let prev = steps.get(i + 1).copied().unwrap_or(0);
        let pred = guided_prediction(model, &x, n, condition, config)?;
        if pred.iter().any(|v| !v.is_finite()) {
            return Err(Error::Model(format!("non-finite prediction at timestep {n}")));
        }
        let (x0, eps) = schedule.split_prediction(&x, &pred, kind, n)?;
        let z: Vec<T> = standard_normal(rng, dim);
        x = match config.kind {
            SamplerKind::Ddim => schedule.ddim_combine(&x0, &eps, n, prev, config.eta, &z)?,
            SamplerKind::Ancestral => schedule.posterior_step(&x, &x0, n, prev, &z)?,
        };
    }
    Ok(x)
}
