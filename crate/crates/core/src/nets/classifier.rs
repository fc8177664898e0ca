use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{Mlp, ParamSet};
use super::train::{optimize, TrainConfig, TrainOutcome};
use crate::error::check_len;
use crate::{Error, Result, Scalar};

/// A labelled feature vector for the recognizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Labeled<T> {
    pub x: Vec<T>,
    pub label: usize,
}

/// Softmax classifier on top of the same SiLU MLP family as the generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier<T> {
    pub mlp: Mlp<T>,
}

impl<T: Scalar> Classifier<T> {
    pub fn init(in_dim: usize, hidden: &[usize], n_classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self { mlp: Mlp::init(in_dim, hidden, n_classes, &mut rng) }
    }

    pub fn n_classes(&self) -> usize {
        self.mlp.out_dim()
    }

    pub fn logits(&self, x: &[T]) -> Result<Vec<T>> {
        check_len(self.mlp.in_dim(), x.len())?;
        Ok(self.mlp.forward(x))
    }

    /// Arg-max class; ties resolve to the lowest index.
    pub fn predict(&self, x: &[T]) -> Result<usize> {
        let logits = self.logits(x)?;
        let mut best = 0;
        for (i, &v) in logits.iter().enumerate() {
            if v > logits[best] {
                best = i;
            }
        }
        Ok(best)
    }

    /// Fraction of misclassified items.
    pub fn error_rate(&self, data: &[Labeled<T>]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let mut wrong = 0usize;
        for item in data {
            if self.predict(&item.x)? != item.label {
                wrong += 1;
            }
        }
        Ok(wrong as f64 / data.len() as f64)
    }
}

impl<T: Scalar> ParamSet<T> for Classifier<T> {
    fn tensors(&self) -> Vec<&[T]> {
        self.mlp.tensors()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        self.mlp.tensors_mut()
    }
}

/// Mean softmax cross-entropy and its gradient.
pub fn loss_xent<T: Scalar>(clf: &Classifier<T>, batch: &[&Labeled<T>]) -> Result<(T, Classifier<T>)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let scale = T::one() / T::of(batch.len() as f64);
    let mut total = T::zero();
    let mut grad = clf.zeros_like();
    for item in batch {
        check_len(clf.mlp.in_dim(), item.x.len())?;
        if item.label >= clf.n_classes() {
            return Err(Error::Vocabulary { id: item.label, size: clf.n_classes() });
        }
        let (logits, trace) = clf.mlp.forward_traced(&item.x);
        let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
        let z: T = exps.iter().copied().sum();
        total += z.ln() + max - logits[item.label];
        let upstream: Vec<T> = exps
            .iter()
            .enumerate()
            .map(|(k, &e)| {
                let target = if k == item.label { T::one() } else { T::zero() };
                (e / z - target) * scale
            })
            .collect();
        clf.mlp.backward(&trace, &upstream, &mut grad.mlp);
    }
    Ok((total * scale, grad))
}

/// Trains a recognizer with the shared optimizer loop. Returns the outcome
/// with both raw and EMA parameters.
pub fn train_classifier<T: Scalar>(
    data: &[Labeled<T>],
    n_classes: usize,
    hidden: &[usize],
    config: &TrainConfig<T>,
) -> Result<TrainOutcome<Classifier<T>>> {
    let in_dim = data.first().map(|d| d.x.len()).ok_or(Error::EmptyBatch)?;
    let init = Classifier::init(in_dim, hidden, n_classes, config.seed);
    optimize(init, config, |clf, rng| {
        use rand::Rng;
        let batch: Vec<&Labeled<T>> = (0..config.batch_size)
            .map(|_| &data[rng.random_range(0..data.len())])
            .collect();
        loss_xent(clf, &batch)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xent_gradient_matches_difference() {
        let clf = Classifier::<f64>::init(3, &[5], 4, 11);
        let items = [
            Labeled { x: vec![0.3, -0.2, 1.0], label: 2 },
            Labeled { x: vec![-1.0, 0.5, 0.1], label: 0 },
        ];
        let batch: Vec<&Labeled<f64>> = items.iter().collect();
        let (_, grad) = loss_xent(&clf, &batch).unwrap();
        let h = 1e-6;
        let mut probe = clf.clone();
        for (t, gt) in grad.tensors().iter().enumerate() {
            for i in 0..gt.len() {
                let orig = probe.tensors()[t][i];
                probe.tensors_mut()[t][i] = orig + h;
                let (up, _) = loss_xent(&probe, &batch).unwrap();
                probe.tensors_mut()[t][i] = orig - h;
                let (down, _) = loss_xent(&probe, &batch).unwrap();
                probe.tensors_mut()[t][i] = orig;
                let fd = (up - down) / (2.0 * h);
                assert!((fd - gt[i]).abs() < 1e-7, "tensor {t} index {i}: {fd} vs {}", gt[i]);
            }
        }
    }

    #[test]
    fn learns_separable_classes() {
        let data: Vec<Labeled<f64>> = (0..200)
            .map(|i| {
                let label = i % 2;
                let x = if label == 0 { -1.0 } else { 1.0 } + 0.01 * (i as f64 % 7.0);
                Labeled { x: vec![x], label }
            })
            .collect();
        let cfg = TrainConfig { iterations: 400, lr_start: 0.05, ..Default::default() };
        let out = train_classifier(&data, 2, &[8], &cfg).unwrap();
        assert_eq!(out.params.error_rate(&data).unwrap(), 0.0);
    }
}
