use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{silu, silu_grad, Dense, Mlp, MlpTrace, ParamSet};
use crate::diffusion::{Denoiser, Parameterization};
use crate::error::check_len;
use crate::{Error, Result, Scalar};

/// Training objective of a generator network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Direct regression `f(c)` of the target under squared error.
    Mse,
    /// Conditional denoiser `v(x_n, n, c)` trained on noised targets.
    Ddpm,
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Objective::Mse => "mse",
            Objective::Ddpm => "ddpm",
        })
    }
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mse" => Ok(Objective::Mse),
            "ddpm" => Ok(Objective::Ddpm),
            other => Err(Error::Parameter(format!("unknown objective '{other}' (expected mse or ddpm)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub objective: Objective,
    pub data_dim: usize,
    /// Number of real conditions; the embedding table has one extra null row.
    pub n_conditions: usize,
    /// Speakers per content item, with condition ids `content * speakers + speaker`.
    /// Above 1 the embedding is a content row plus a speaker row, so unseen
    /// pairs still get a meaningful embedding.
    #[serde(default = "one")]
    pub speakers: usize,
    pub cond_dim: usize,
    /// Sinusoidal feature count (even). Unused for `Mse`.
    pub time_features: usize,
    pub time_dim: usize,
    pub hidden: Vec<usize>,
}

fn one() -> usize {
    1
}

impl Topology {
    /// Three hidden layers of 128 units.
    pub fn standard(objective: Objective, data_dim: usize, n_conditions: usize) -> Self {
        Self {
            objective,
            data_dim,
            n_conditions,
            speakers: 1,
            cond_dim: 16,
            time_features: 16,
            time_dim: 32,
            hidden: vec![128, 128, 128],
        }
    }

    fn uses_time(&self) -> bool {
        self.objective == Objective::Ddpm
    }

    fn mlp_in_dim(&self) -> usize {
        if self.uses_time() {
            self.data_dim + self.time_dim + self.cond_dim
        } else {
            self.cond_dim
        }
    }

    fn factored(&self) -> bool {
        self.speakers > 1
    }

    /// Rows of the embedding table, the null row last.
    fn table_rows(&self) -> usize {
        if self.factored() {
            self.n_conditions / self.speakers + self.speakers + 1
        } else {
            self.n_conditions + 1
        }
    }

    fn validate(&self) -> Result<()> {
        if self.data_dim == 0 {
            return Err(Error::Parameter("data_dim must be positive".into()));
        }
        if self.speakers == 0 || self.n_conditions % self.speakers != 0 {
            return Err(Error::Parameter(format!(
                "{} conditions do not split into {} speakers",
                self.n_conditions, self.speakers
            )));
        }
        if self.uses_time() && (self.time_features == 0 || self.time_features % 2 != 0) {
            return Err(Error::Parameter("time_features must be a positive even number".into()));
        }
        Ok(())
    }
}

/// Sinusoidal features of a timestep: `sin(n f_k), cos(n f_k)` with
/// geometrically spaced frequencies `f_k = 10000^(-k / half)`.
pub fn timestep_features<T: Scalar>(n: usize, count: usize) -> Vec<T> {
    let half = count / 2;
    let mut out = Vec::with_capacity(count);
    let freqs: Vec<f64> = (0..half)
        .map(|k| (-(10000f64.ln()) * k as f64 / half as f64).exp())
        .collect();
    out.extend(freqs.iter().map(|f| T::of((n as f64 * f).sin())));
    out.extend(freqs.iter().map(|f| T::of((n as f64 * f).cos())));
    out
}

/// Parameters of the generator network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetParams<T> {
    pub topology: Topology,
    /// Row-major `rows x cond_dim`: one row per condition, or per content item
    /// then per speaker when factored. The last row is the null condition.
    pub cond_table: Vec<T>,
    pub time_proj: Dense<T>,
    pub mlp: Mlp<T>,
}

/// Forward intermediates needed by [`NetParams::backward`].
#[derive(Debug, Clone)]
pub struct NetTrace<T> {
    rows: Vec<usize>,
    time_feats: Vec<T>,
    time_pre: Vec<T>,
    mlp: MlpTrace<T>,
}

impl<T: Scalar> NetParams<T> {
    /// Seeded initialization; embeddings uniform in `±1`, layers scaled by fan-in.
    pub fn init(topology: Topology, seed: u64) -> Result<Self> {
        topology.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = topology.table_rows();
        let cond_table = (0..rows * topology.cond_dim)
            .map(|_| T::of(rng.random_range(-1.0..1.0)))
            .collect();
        let time_proj = if topology.uses_time() {
            Dense::init(topology.time_features, topology.time_dim, &mut rng)
        } else {
            Dense::zeros(0, 0)
        };
        let mlp = Mlp::init(topology.mlp_in_dim(), &topology.hidden, topology.data_dim, &mut rng);
        Ok(Self { topology, cond_table, time_proj, mlp })
    }

    pub fn null_row(&self) -> usize {
        self.topology.table_rows() - 1
    }

    /// Embedding rows summed for a condition.
    fn rows_for(&self, condition: Option<usize>) -> Result<Vec<usize>> {
        let topo = &self.topology;
        match condition {
            None => Ok(vec![self.null_row()]),
            Some(id) if id >= topo.n_conditions => Err(Error::Vocabulary { id, size: topo.n_conditions }),
            Some(id) if topo.factored() => {
                let n_content = topo.n_conditions / topo.speakers;
                Ok(vec![id / topo.speakers, n_content + id % topo.speakers])
            }
            Some(id) => Ok(vec![id]),
        }
    }

    fn check_inputs(&self, x_in: &[T], n: Option<usize>) -> Result<()> {
        match (self.topology.objective, n) {
            (Objective::Ddpm, Some(_)) => check_len(self.topology.data_dim, x_in.len()),
            (Objective::Mse, None) => check_len(0, x_in.len()),
            (Objective::Ddpm, None) => Err(Error::Parameter("denoiser needs a timestep".into())),
            (Objective::Mse, Some(_)) => Err(Error::Parameter("regressor takes no timestep".into())),
        }
    }

    /// `f(c)` for the regressor (`x_in` empty, `n = None`) or `v(x_n, n, c)` for
    /// the denoiser.
    pub fn forward(&self, x_in: &[T], n: Option<usize>, condition: Option<usize>) -> Result<Vec<T>> {
        Ok(self.forward_traced(x_in, n, condition)?.0)
    }

    pub fn forward_traced(
        &self,
        x_in: &[T],
        n: Option<usize>,
        condition: Option<usize>,
    ) -> Result<(Vec<T>, NetTrace<T>)> {
        self.check_inputs(x_in, n)?;
        let rows = self.rows_for(condition)?;
        let d = self.topology.cond_dim;
        let mut input = Vec::with_capacity(self.topology.mlp_in_dim());
        let mut time_feats = Vec::new();
        let mut time_pre = Vec::new();
        if let Some(n) = n {
            input.extend_from_slice(x_in);
            time_feats = timestep_features(n, self.topology.time_features);
            time_pre = self.time_proj.forward(&time_feats);
            input.extend(time_pre.iter().map(|&z| silu(z)));
        }
        let start = input.len();
        input.extend_from_slice(&self.cond_table[rows[0] * d..(rows[0] + 1) * d]);
        for &r in &rows[1..] {
            for (v, &e) in input[start..].iter_mut().zip(&self.cond_table[r * d..(r + 1) * d]) {
                *v += e;
            }
        }
        let (out, mlp) = self.mlp.forward_traced(&input);
        Ok((out, NetTrace { rows, time_feats, time_pre, mlp }))
    }

    /// Accumulates parameter gradients for one forward pass into `grad`.
    pub fn backward(&self, trace: &NetTrace<T>, upstream: &[T], grad: &mut Self) -> Result<()> {
        check_len(self.topology.data_dim, upstream.len())?;
        let d_in = self.mlp.backward(&trace.mlp, upstream, &mut grad.mlp);
        let d = self.topology.cond_dim;
        let cond_offset = d_in.len() - d;
        for &row in &trace.rows {
            for (g, &v) in grad.cond_table[row * d..(row + 1) * d].iter_mut().zip(&d_in[cond_offset..]) {
                *g += v;
            }
        }
        if self.topology.uses_time() {
            let start = self.topology.data_dim;
            let d_time: Vec<T> = d_in[start..start + self.topology.time_dim]
                .iter()
                .zip(&trace.time_pre)
                .map(|(&g, &z)| g * silu_grad(z))
                .collect();
            self.time_proj.backward(&trace.time_feats, &d_time, &mut grad.time_proj);
        }
        Ok(())
    }

    /// Gradients of `<upstream, forward(x_in, n, c)>` with respect to every parameter.
    pub fn gradients(
        &self,
        x_in: &[T],
        n: Option<usize>,
        condition: Option<usize>,
        upstream: &[T],
    ) -> Result<Self> {
        let (_, trace) = self.forward_traced(x_in, n, condition)?;
        let mut grad = self.zeros_like();
        self.backward(&trace, upstream, &mut grad)?;
        Ok(grad)
    }
}

impl<T: Scalar> ParamSet<T> for NetParams<T> {
    fn tensors(&self) -> Vec<&[T]> {
        let mut v = vec![
            self.cond_table.as_slice(),
            self.time_proj.weight.as_slice(),
            self.time_proj.bias.as_slice(),
        ];
        v.extend(self.mlp.tensors());
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut v = vec![
            self.cond_table.as_mut_slice(),
            self.time_proj.weight.as_mut_slice(),
            self.time_proj.bias.as_mut_slice(),
        ];
        v.extend(self.mlp.tensors_mut());
        v
    }
}

impl<T: Scalar> Denoiser<T> for NetParams<T> {
    fn parameterization(&self) -> Parameterization {
        Parameterization::V
    }

    fn data_dim(&self) -> usize {
        self.topology.data_dim
    }

    fn predict(&self, x_n: &[T], n: usize, condition: Option<usize>) -> Result<Vec<T>> {
        self.forward(x_n, Some(n), condition)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(objective: Objective) -> Topology {
        Topology {
            objective,
            data_dim: 2,
            n_conditions: 3,
            speakers: 1,
            cond_dim: 4,
            time_features: 6,
            time_dim: 5,
            hidden: vec![7, 6],
        }
    }

    #[test]
    fn zero_weights_output_final_bias() {
        let mut p = NetParams::<f64>::init(small(Objective::Ddpm), 1).unwrap();
        for t in p.tensors_mut() {
            t.fill(0.0);
        }
        let last = p.mlp.layers.len() - 1;
        p.mlp.layers[last].bias = vec![0.25, -4.0];
        assert_eq!(p.forward(&[1.0, 2.0], Some(10), Some(1)).unwrap(), vec![0.25, -4.0]);
    }

    #[test]
    fn vocabulary_and_input_errors() {
        let p = NetParams::<f64>::init(small(Objective::Ddpm), 1).unwrap();
        assert!(matches!(
            p.forward(&[0.0, 0.0], Some(1), Some(3)),
            Err(Error::Vocabulary { id: 3, size: 3 })
        ));
        assert!(p.forward(&[0.0, 0.0], None, Some(0)).is_err());
        assert!(p.forward(&[0.0], Some(1), Some(0)).is_err());
        let m = NetParams::<f64>::init(small(Objective::Mse), 1).unwrap();
        assert!(m.forward(&[], Some(1), Some(0)).is_err());
        assert_eq!(m.forward(&[], None, None).unwrap().len(), 2);
    }

    #[test]
    fn duplicates_agree() {
        let p = NetParams::<f64>::init(small(Objective::Ddpm), 9).unwrap();
        let q = p.clone();
        let x = [0.3, -0.8];
        assert_eq!(p.forward(&x, Some(17), Some(2)).unwrap(), q.forward(&x, Some(17), Some(2)).unwrap());
    }

    #[test]
    fn zero_upstream_zero_gradient() {
        let p = NetParams::<f64>::init(small(Objective::Ddpm), 2).unwrap();
        let g = p.gradients(&[0.1, 0.2], Some(5), Some(0), &[0.0, 0.0]).unwrap();
        assert!(g.tensors().iter().all(|t| t.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn only_used_embedding_row_gets_gradient() {
        let p = NetParams::<f64>::init(small(Objective::Mse), 2).unwrap();
        let g = p.gradients(&[], None, Some(1), &[1.0, -1.0]).unwrap();
        let d = p.topology.cond_dim;
        for (row, chunk) in g.cond_table.chunks(d).enumerate() {
            let touched = chunk.iter().any(|&v| v != 0.0);
            assert_eq!(touched, row == 1);
        }
    }

    #[test]
    fn timestep_features_layout() {
        let f: Vec<f64> = timestep_features(0, 8);
        assert_eq!(&f[..4], &[0.0; 4]);
        assert_eq!(&f[4..], &[1.0; 4]);
    }
}
