use serde::{Deserialize, Serialize};

use super::task::{Segment, ToyTaskSpec};
use crate::diffusion::{sample_batch, NoiseSchedule, SamplerConfig, ScheduleShape};
use crate::error::check_len;
use crate::nets::{train_topology, train_classifier, Checkpoint, Classifier, Example, Labeled, LossPoint, NetParams, Objective, TrainConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleConfig {
    pub n_steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub shape: ScheduleShape,
    pub zero_terminal_snr: bool,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self { n_steps: 1000, beta_start: 1e-4, beta_end: 0.02, shape: ScheduleShape::Linear, zero_terminal_snr: true }
    }
}

impl ScheduleConfig {
    pub fn build(&self) -> Result<NoiseSchedule<f64>> {
        let s = NoiseSchedule::build(self.n_steps, self.beta_start, self.beta_end, self.shape)?;
        if self.zero_terminal_snr {
            s.rescale_zero_terminal_snr()
        } else {
            Ok(s)
        }
    }
}

/// Generator training and inference settings shared by both objectives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub train: TrainConfig<f64>,
    pub sampler: SamplerConfig<f64>,
    pub schedule: ScheduleConfig,
    /// Standard deviation of each data dimension as seen by the network. A
    /// value of exactly 1 leaves the v target uncorrelated with a noised
    /// symmetric input at every timestep, which stalls training.
    pub data_scale: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig { iterations: 20_000, lr_start: 0.05, ema_decay: 0.995, ..TrainConfig::default() },
            sampler: SamplerConfig::default(),
            schedule: ScheduleConfig::default(),
            data_scale: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecognizerConfig {
    pub hidden: Vec<usize>,
    pub train: TrainConfig<f64>,
}

impl Default for RecognizerConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32, 32],
            train: TrainConfig {
                objective: Objective::Mse,
                batch_size: 32,
                lr_start: 0.05,
                iterations: 3000,
                ema_decay: 0.99,
                ..TrainConfig::default()
            },
        }
    }
}

/// Affine map between task coordinates and network coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Normalizer {
    pub fn for_task(spec: &ToyTaskSpec, data_scale: f64) -> Self {
        let (mean, std) = spec.marginal_moments();
        let scale = std.iter().map(|&s| if s > 0.0 { data_scale / s } else { 1.0 }).collect();
        Self { mean, scale }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) * s).collect()
    }

    pub fn inverse(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| v / s + m).collect()
    }
}

/// A trained generator in task coordinates. Inference uses the EMA weights.
#[derive(Debug, Clone)]
pub struct Generator {
    pub params: NetParams<f64>,
    pub raw_params: NetParams<f64>,
    pub seed: u64,
    pub steps: usize,
    pub normalizer: Normalizer,
    pub curve: Vec<LossPoint>,
    schedule: NoiseSchedule<f64>,
    sampler: SamplerConfig<f64>,
}

impl Generator {
    pub fn fit(
        spec: &ToyTaskSpec,
        segments: &[Segment],
        objective: Objective,
        config: &GeneratorConfig,
        seed: u64,
    ) -> Result<Self> {
        if !(config.data_scale > 0.0) {
            return Err(Error::Parameter("data_scale must be positive".into()));
        }
        let normalizer = Normalizer::for_task(spec, config.data_scale);
        let examples: Vec<Example<f64>> = segments
            .iter()
            .map(|s| Example { x: normalizer.forward(&s.x), condition: s.condition })
            .collect();
        let schedule = config.schedule.build()?;
        config.sampler.validate(schedule.n_steps())?;
        let train_config = TrainConfig { objective, seed, ..config.train.clone() };
        let mut topology = train_config.network.topology(objective, spec.data_dim, spec.n_conditions());
        topology.speakers = spec.n_speakers;
        let out = train_topology(&examples, topology, &train_config, Some(&schedule))?;
        Ok(Self {
            params: out.ema,
            raw_params: out.params,
            seed,
            steps: train_config.iterations,
            normalizer,
            curve: out.curve,
            schedule,
            sampler: config.sampler.clone(),
        })
    }

    pub fn to_checkpoint(&self, config: &GeneratorConfig) -> GeneratorCheckpoint {
        GeneratorCheckpoint {
            checkpoint: Checkpoint::new(self.seed, self.steps, self.raw_params.clone(), self.params.clone()),
            normalizer: self.normalizer.clone(),
            config: config.clone(),
        }
    }

    pub fn from_checkpoint(saved: GeneratorCheckpoint) -> Result<Self> {
        let schedule = saved.config.schedule.build()?;
        saved.config.sampler.validate(schedule.n_steps())?;
        let ck = saved.checkpoint;
        check_len(ck.topology.data_dim, saved.normalizer.mean.len())?;
        Ok(Self {
            params: ck.ema_params,
            raw_params: ck.params,
            seed: ck.seed,
            steps: ck.step,
            normalizer: saved.normalizer,
            curve: Vec::new(),
            schedule,
            sampler: saved.config.sampler,
        })
    }

    pub fn objective(&self) -> Objective {
        self.params.topology.objective
    }

    /// One output per requested condition. The regressor is deterministic;
    /// the diffusion model draws item `i` from stream `i` of `seed`.
    pub fn generate(&self, conditions: &[usize], seed: u64) -> Result<Vec<Vec<f64>>> {
        let raw = match self.objective() {
            Objective::Mse => conditions
                .iter()
                .map(|&c| self.params.forward(&[], None, Some(c)))
                .collect::<Result<Vec<_>>>()?,
            Objective::Ddpm => {
                let conds: Vec<Option<usize>> = conditions.iter().map(|&c| Some(c)).collect();
                sample_batch(&self.params, &conds, &self.sampler, &self.schedule, seed)?
            }
        };
        Ok(raw.iter().map(|z| self.normalizer.inverse(z)).collect())
    }

    /// Replaces every segment's features with generated ones, keeping labels.
    pub fn synthesize(&self, segments: &[Segment], seed: u64) -> Result<Vec<Labeled<f64>>> {
        let conditions: Vec<usize> = segments.iter().map(|s| s.condition).collect();
        let xs = self.generate(&conditions, seed)?;
        Ok(xs.into_iter().zip(segments).map(|(x, s)| Labeled { x, label: s.content }).collect())
    }
}

/// Network checkpoint plus what is needed to sample from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorCheckpoint {
    pub checkpoint: Checkpoint,
    pub normalizer: Normalizer,
    pub config: GeneratorConfig,
}

impl GeneratorCheckpoint {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let saved: Self = serde_json::from_str(text)?;
        Checkpoint::from_json(&saved.checkpoint.to_json()?)?;
        Ok(saved)
    }
}

/// Trains the stand-in recognizer (a word classifier) and returns its EMA
/// weights.
pub fn fit_recognizer(
    data: &[Labeled<f64>],
    n_words: usize,
    config: &RecognizerConfig,
    seed: u64,
) -> Result<Classifier<f64>> {
    let train_config = TrainConfig { seed, ..config.train.clone() };
    Ok(train_classifier(data, n_words, &config.hidden, &train_config)?.ema)
}

/// Word error rate of a recognizer over whole utterances; every segment is a
/// word, so alignment reduces to per-word substitutions.
pub fn utterance_error_rate(recognizer: &Classifier<f64>, eval: &[Segment]) -> Result<f64> {
    if eval.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut errors = 0usize;
    let mut words = 0usize;
    let mut start = 0;
    while start < eval.len() {
        let utt = eval[start].utterance;
        let end = start + eval[start..].iter().take_while(|s| s.utterance == utt).count();
        let reference: Vec<usize> = eval[start..end].iter().map(|s| s.content).collect();
        let hypothesis = eval[start..end]
            .iter()
            .map(|s| recognizer.predict(&s.x))
            .collect::<Result<Vec<_>>>()?;
        let stats = crate::eval::word_error_rate(&reference, &hypothesis)?;
        errors += stats.errors();
        words += stats.ref_len;
        start = end;
    }
    Ok(errors as f64 / words as f64)
}
