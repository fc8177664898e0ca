use std::borrow::Borrow;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::mlp::ParamSet;
use super::{Example, NetParams};
use crate::diffusion::NoiseSchedule;
use crate::error::check_len;
use crate::{Error, Result, Scalar};

/// Mean over the batch of `||x - f(c)||^2` (summed over components) and its gradient.
pub fn loss_mse<T: Scalar, E: Borrow<Example<T>>>(
    params: &NetParams<T>,
    batch: &[E],
) -> Result<(T, NetParams<T>)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let scale = T::one() / T::of(batch.len() as f64);
    let two = T::of(2.0);
    let mut total = T::zero();
    let mut grad = params.zeros_like();
    for ex in batch {
        let ex = ex.borrow();
        let (pred, trace) = params.forward_traced(&[], None, Some(ex.condition))?;
        check_len(pred.len(), ex.x.len())?;
        let diff: Vec<T> = pred.iter().zip(&ex.x).map(|(&p, &x)| p - x).collect();
        total += diff.iter().map(|&d| d * d).sum::<T>();
        let upstream: Vec<T> = diff.iter().map(|&d| two * d * scale).collect();
        params.backward(&trace, &upstream, &mut grad)?;
    }
    Ok((total * scale, grad))
}

/// Denoising loss in the v view. Per item draws `n ~ U{1..N}` and
/// `eps ~ N(0, I)`, noises the target, swaps in the null condition with
/// probability `cond_dropout`, and regresses the v target.
pub fn loss_ddpm<T: Scalar, E: Borrow<Example<T>>, R: Rng + ?Sized>(
    params: &NetParams<T>,
    batch: &[E],
    schedule: &NoiseSchedule<T>,
    cond_dropout: f64,
    rng: &mut R,
) -> Result<(T, NetParams<T>)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let scale = T::one() / T::of(batch.len() as f64);
    let two = T::of(2.0);
    let mut total = T::zero();
    let mut grad = params.zeros_like();
    for ex in batch {
        let ex = ex.borrow();
        check_len(params.topology.data_dim, ex.x.len())?;
        let n = rng.random_range(1..=schedule.n_steps());
        let noise: Vec<T> = (0..ex.x.len())
            .map(|_| T::of(StandardNormal.sample(rng)))
            .collect();
        let dropped = cond_dropout > 0.0 && rng.random::<f64>() < cond_dropout;
        let condition = if dropped { None } else { Some(ex.condition) };
        let x_n = schedule.q_sample(&ex.x, n, &noise)?;
        let target = schedule.v_target(&ex.x, &noise, n)?;
        let (pred, trace) = params.forward_traced(&x_n, Some(n), condition)?;
        let diff: Vec<T> = pred.iter().zip(&target).map(|(&p, &t)| p - t).collect();
        total += diff.iter().map(|&d| d * d).sum::<T>();
        let upstream: Vec<T> = diff.iter().map(|&d| two * d * scale).collect();
        params.backward(&trace, &upstream, &mut grad)?;
    }
    Ok((total * scale, grad))
}
