use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::Scalar;

/// A set of parameter tensors that gradients, optimizers and EMA can walk in a
/// fixed order.
pub trait ParamSet<T: Scalar>: Clone {
    fn tensors(&self) -> Vec<&[T]>;

    fn tensors_mut(&mut self) -> Vec<&mut [T]>;

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(T::zero());
        }
        z
    }

    fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// `self += k * other`, tensor by tensor.
    fn add_scaled(&mut self, other: &Self, k: T) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += k * s;
            }
        }
    }
}

#[inline]
pub(crate) fn sigmoid<T: Scalar>(z: T) -> T {
    T::one() / (T::one() + (-z).exp())
}

#[inline]
pub(crate) fn silu<T: Scalar>(z: T) -> T {
    z * sigmoid(z)
}

#[inline]
pub(crate) fn silu_grad<T: Scalar>(z: T) -> T {
    let s = sigmoid(z);
    s * (T::one() + z * (T::one() - s))
}

/// Fully connected layer, weights row-major `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense<T> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: vec![T::zero(); in_dim * out_dim],
            bias: vec![T::zero(); out_dim],
        }
    }

    /// Weights uniform in `±1/sqrt(fan_in)`, zero biases.
    pub fn init<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let mut layer = Self::zeros(in_dim, out_dim);
        if in_dim > 0 {
            let bound = 1.0 / (in_dim as f64).sqrt();
            for w in &mut layer.weight {
                *w = T::of(rng.random_range(-bound..bound));
            }
        }
        layer
    }

    pub fn forward(&self, input: &[T]) -> Vec<T> {
        debug_assert_eq!(input.len(), self.in_dim);
        self.weight
            .chunks_exact(self.in_dim.max(1))
            .take(self.out_dim)
            .zip(&self.bias)
            .map(|(row, &b)| {
                if self.in_dim == 0 {
                    b
                } else {
                    row.iter().zip(input).fold(b, |acc, (&w, &x)| acc + w * x)
                }
            })
            .collect()
    }

    /// Accumulates parameter gradients into `grad` and returns the gradient
    /// with respect to `input`.
    pub fn backward(&self, input: &[T], upstream: &[T], grad: &mut Dense<T>) -> Vec<T> {
        let mut d_input = vec![T::zero(); self.in_dim];
        for o in 0..self.out_dim {
            let g = upstream[o];
            grad.bias[o] += g;
            if g == T::zero() {
                continue;
            }
            let row = o * self.in_dim;
            for i in 0..self.in_dim {
                grad.weight[row + i] += g * input[i];
                d_input[i] += self.weight[row + i] * g;
            }
        }
        d_input
    }
}

/// Stack of dense layers with SiLU between them and a linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp<T> {
    pub layers: Vec<Dense<T>>,
}

/// Forward intermediates: the input of every layer and every pre-activation.
#[derive(Debug, Clone)]
pub struct MlpTrace<T> {
    inputs: Vec<Vec<T>>,
    pre: Vec<Vec<T>>,
}

impl<T: Scalar> Mlp<T> {
    pub fn init<R: Rng + ?Sized>(in_dim: usize, hidden: &[usize], out_dim: usize, rng: &mut R) -> Self {
        let mut dims = vec![in_dim];
        dims.extend_from_slice(hidden);
        dims.push(out_dim);
        let layers = dims.windows(2).map(|w| Dense::init(w[0], w[1], rng)).collect();
        Self { layers }
    }

    pub fn in_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim)
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    pub fn forward(&self, input: &[T]) -> Vec<T> {
        self.forward_traced(input).0
    }

    pub fn forward_traced(&self, input: &[T]) -> (Vec<T>, MlpTrace<T>) {
        let mut trace = MlpTrace { inputs: Vec::with_capacity(self.layers.len()), pre: Vec::new() };
        let mut a = input.to_vec();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(&a);
            trace.inputs.push(a);
            if l == last {
                trace.pre.push(Vec::new());
                a = z;
            } else {
                a = z.iter().map(|&v| silu(v)).collect();
                trace.pre.push(z);
            }
        }
        (a, trace)
    }

    /// Backpropagates `upstream` (gradient w.r.t. the output), accumulating into
    /// `grad`, and returns the gradient w.r.t. the input.
    pub fn backward(&self, trace: &MlpTrace<T>, upstream: &[T], grad: &mut Mlp<T>) -> Vec<T> {
        let mut g = upstream.to_vec();
        let last = self.layers.len() - 1;
        for l in (0..self.layers.len()).rev() {
            if l != last {
                for (gv, &z) in g.iter_mut().zip(&trace.pre[l]) {
                    *gv *= silu_grad(z);
                }
            }
            g = self.layers[l].backward(&trace.inputs[l], &g, &mut grad.layers[l]);
        }
        g
    }
}

impl<T: Scalar> ParamSet<T> for Mlp<T> {
    fn tensors(&self) -> Vec<&[T]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }
}
