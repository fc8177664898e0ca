use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::ParamSet;
use super::{loss_ddpm, loss_mse, Example, NetParams, Objective, Topology};
use crate::diffusion::NoiseSchedule;
use crate::{Error, Result, Scalar};

/// Learning-rate multiplier over the reference starting rate, which targets a
/// much longer run than desk-scale experiments afford.
pub const DESK_LR_MULTIPLIER: f64 = 10.0;

/// Starting learning rate of the large-scale reference setup.
pub const REFERENCE_LR_START: f64 = 4e-5;

/// Hidden layout and embedding sizes of a generator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkShape {
    pub hidden: Vec<usize>,
    pub cond_dim: usize,
    pub time_features: usize,
    pub time_dim: usize,
}

impl Default for NetworkShape {
    fn default() -> Self {
        Self { hidden: vec![128, 128, 128], cond_dim: 16, time_features: 16, time_dim: 32 }
    }
}

impl NetworkShape {
    pub fn topology(&self, objective: Objective, data_dim: usize, n_conditions: usize) -> Topology {
        Topology {
            objective,
            data_dim,
            n_conditions,
            speakers: 1,
            cond_dim: self.cond_dim,
            time_features: self.time_features,
            time_dim: self.time_dim,
            hidden: self.hidden.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig<T> {
    pub objective: Objective,
    pub batch_size: usize,
    pub lr_start: T,
    pub iterations: usize,
    pub ema_decay: T,
    pub momentum: T,
    /// Global gradient-norm ceiling; 0 disables clipping.
    pub max_grad_norm: T,
    pub cond_dropout_prob: f64,
    pub seed: u64,
    pub log_every: usize,
    pub network: NetworkShape,
}

impl<T: Scalar> Default for TrainConfig<T> {
    fn default() -> Self {
        Self {
            objective: Objective::Ddpm,
            batch_size: 16,
            lr_start: T::of(REFERENCE_LR_START * DESK_LR_MULTIPLIER),
            iterations: 20_000,
            ema_decay: T::of(0.999),
            momentum: T::of(0.9),
            max_grad_norm: T::zero(),
            cond_dropout_prob: 0.1,
            seed: 0,
            log_every: 100,
            network: NetworkShape::default(),
        }
    }
}

impl<T: Scalar> TrainConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Parameter("batch_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.cond_dropout_prob) {
            return Err(Error::Parameter("cond_dropout_prob must be in [0, 1)".into()));
        }
        if !(self.ema_decay > T::zero() && self.ema_decay < T::one()) {
            return Err(Error::Parameter("ema_decay must be in (0, 1)".into()));
        }
        if !(self.lr_start >= T::zero()) || !(self.momentum >= T::zero()) || !(self.max_grad_norm >= T::zero()) {
            return Err(Error::Parameter("lr_start, momentum and max_grad_norm must be >= 0".into()));
        }
        Ok(())
    }
}

/// `lr_start * 0.5 * (1 + cos(pi * step / total))`.
pub fn cosine_lr<T: Scalar>(lr_start: T, step: usize, total: usize) -> T {
    if total == 0 {
        return lr_start;
    }
    let progress = (step.min(total) as f64) / total as f64;
    lr_start * T::of(0.5 * (1.0 + (std::f64::consts::PI * progress).cos()))
}

/// `ema <- decay * ema + (1 - decay) * params`, elementwise.
pub fn ema_update<T: Scalar, P: ParamSet<T>>(ema: &mut P, params: &P, decay: T) {
    let keep = T::one() - decay;
    for (e, p) in ema.tensors_mut().into_iter().zip(params.tensors()) {
        for (ev, &pv) in e.iter_mut().zip(p) {
            *ev = decay * *ev + keep * pv;
        }
    }
}

/// Rescales `grad` so its global L2 norm is at most `max_norm`.
pub fn clip_grad_norm<T: Scalar, P: ParamSet<T>>(grad: &mut P, max_norm: T) {
    let norm = grad.tensors().iter().flat_map(|t| t.iter()).map(|&g| g * g).sum::<T>().sqrt();
    if norm > max_norm {
        let k = max_norm / norm;
        for t in grad.tensors_mut() {
            t.iter_mut().for_each(|g| *g *= k);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub step: usize,
    pub loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<P> {
    pub params: P,
    pub ema: P,
    pub curve: Vec<LossPoint>,
}

/// Shared minibatch loop: SGD with momentum under the cosine schedule, EMA
/// after every update. `batch_loss` receives the current parameters and the
/// run's generator and returns the batch loss with its gradient.
pub fn optimize<T, P, F>(init: P, config: &TrainConfig<T>, mut batch_loss: F) -> Result<TrainOutcome<P>>
where
    T: Scalar,
    P: ParamSet<T>,
    F: FnMut(&P, &mut ChaCha8Rng) -> Result<(T, P)>,
{
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = init;
    let mut ema = params.clone();
    let mut velocity = params.zeros_like();
    let mut curve = Vec::new();
    let mut window = 0.0;
    let mut window_len = 0usize;
    let log_every = config.log_every.max(1);
    for step in 0..config.iterations {
        let lr = cosine_lr(config.lr_start, step, config.iterations);
        let (loss, mut grad) = batch_loss(&params, &mut rng)?;
        if !loss.is_finite() || !grad.is_finite() {
            return Err(Error::Divergence { step, loss: loss.to_f64_lossy() });
        }
        if config.max_grad_norm > T::zero() {
            clip_grad_norm(&mut grad, config.max_grad_norm);
        }
        for (v, g) in velocity.tensors_mut().into_iter().zip(grad.tensors()) {
            for (vv, &gv) in v.iter_mut().zip(g) {
                *vv = config.momentum * *vv + gv;
            }
        }
        params.add_scaled(&velocity, -lr);
        ema_update(&mut ema, &params, config.ema_decay);
        window += loss.to_f64_lossy();
        window_len += 1;
        if (step + 1) % log_every == 0 || step + 1 == config.iterations {
            curve.push(LossPoint { step: step + 1, loss: window / window_len as f64, lr: lr.to_f64_lossy() });
            window = 0.0;
            window_len = 0;
        }
    }
    Ok(TrainOutcome { params, ema, curve })
}

pub(crate) fn draw_batch<'a, T, R: Rng + ?Sized>(
    data: &'a [Example<T>],
    size: usize,
    rng: &mut R,
) -> Vec<&'a Example<T>> {
    (0..size).map(|_| &data[rng.random_range(0..data.len())]).collect()
}

/// Trains a generator on `(x, condition)` pairs. `schedule` is required for
/// the diffusion objective and ignored for regression.
pub fn train<T: Scalar>(
    data: &[Example<T>],
    data_dim: usize,
    n_conditions: usize,
    config: &TrainConfig<T>,
    schedule: Option<&NoiseSchedule<T>>,
) -> Result<TrainOutcome<NetParams<T>>> {
    train_topology(data, config.network.topology(config.objective, data_dim, n_conditions), config, schedule)
}

/// [`train`] with an explicit topology, e.g. one with factored speaker
/// embeddings. The topology's objective must match the config's.
pub fn train_topology<T: Scalar>(
    data: &[Example<T>],
    topology: Topology,
    config: &TrainConfig<T>,
    schedule: Option<&NoiseSchedule<T>>,
) -> Result<TrainOutcome<NetParams<T>>> {
    if topology.objective != config.objective {
        return Err(Error::Parameter("topology and config disagree on the objective".into()));
    }
    let init = NetParams::init(topology, config.seed)?;
    if config.iterations == 0 {
        return Ok(TrainOutcome { ema: init.clone(), params: init, curve: Vec::new() });
    }
    if data.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let schedule = match (config.objective, schedule) {
        (Objective::Ddpm, None) => {
            return Err(Error::Parameter("diffusion training needs a noise schedule".into()))
        }
        (_, s) => s,
    };
    optimize(init, config, |params, rng| {
        let batch = draw_batch(data, config.batch_size, rng);
        match config.objective {
            Objective::Mse => loss_mse(params, &batch),
            Objective::Ddpm => {
                loss_ddpm(params, &batch, schedule.expect("checked"), config.cond_dropout_prob, rng)
            }
        }
    })
}

/// Writes a loss curve as `step,loss,lr` CSV.
pub fn write_loss_csv<W: Write>(curve: &[LossPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in curve {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}
