use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::nets::{Example, Labeled};
use crate::{Error, Result};

/// One isotropic Gaussian component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub mean: Vec<f64>,
    pub std: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mixture {
    pub components: Vec<Component>,
}

impl Mixture {
    pub fn mean(&self) -> Vec<f64> {
        let dim = self.components[0].mean.len();
        let mut m = vec![0.0; dim];
        for c in &self.components {
            for (acc, &v) in m.iter_mut().zip(&c.mean) {
                *acc += c.weight * v;
            }
        }
        m
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = &self.components[self.components.len() - 1];
        for c in &self.components {
            acc += c.weight;
            if u < acc {
                pick = c;
                break;
            }
        }
        pick.mean
            .iter()
            .map(|&m| {
                let z: f64 = StandardNormal.sample(rng);
                m + pick.std * z
            })
            .collect()
    }
}

/// Conditional target distributions indexed by
/// `condition = content * n_speakers + speaker`. Content labels play the role
/// of words; utterances are sequences of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyTaskSpec {
    pub n_content: usize,
    pub n_speakers: usize,
    pub data_dim: usize,
    pub mixtures: Vec<Mixture>,
    /// Words per utterance.
    #[serde(default = "default_utterance_len")]
    pub utterance_len: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_utterance_len() -> usize {
    6
}

impl ToyTaskSpec {
    pub fn n_conditions(&self) -> usize {
        self.n_content * self.n_speakers
    }

    pub fn condition(&self, content: usize, speaker: usize) -> usize {
        content * self.n_speakers + speaker
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        if self.n_content == 0 || self.n_speakers == 0 || self.data_dim == 0 || self.utterance_len == 0 {
            return bad("task sizes must be positive".into());
        }
        if self.mixtures.len() != self.n_conditions() {
            return Err(Error::Shape { expected: self.n_conditions(), got: self.mixtures.len() });
        }
        for (i, m) in self.mixtures.iter().enumerate() {
            if m.components.is_empty() {
                return bad(format!("condition {i} has no components"));
            }
            let total: f64 = m.components.iter().map(|c| c.weight).sum();
            if (total - 1.0).abs() > 1e-9 {
                return bad(format!("condition {i}: weights sum to {total}"));
            }
            for c in &m.components {
                if c.mean.len() != self.data_dim {
                    return Err(Error::Shape { expected: self.data_dim, got: c.mean.len() });
                }
                if !(c.std > 0.0) || !(c.weight >= 0.0) || c.mean.iter().any(|v| !v.is_finite()) {
                    return bad(format!("condition {i}: stds must be > 0 and weights >= 0"));
                }
            }
        }
        Ok(())
    }

    /// Whether some condition has two or more modes with positive weight.
    pub fn is_one_to_many(&self) -> bool {
        self.mixtures.iter().any(|m| m.components.iter().filter(|c| c.weight > 0.0).count() >= 2)
    }

    /// Per-dimension mean and standard deviation of the marginal over
    /// uniformly drawn conditions.
    pub fn marginal_moments(&self) -> (Vec<f64>, Vec<f64>) {
        let k = self.mixtures.len() as f64;
        let mut mean = vec![0.0; self.data_dim];
        let mut second = vec![0.0; self.data_dim];
        for m in &self.mixtures {
            for c in &m.components {
                for d in 0..self.data_dim {
                    mean[d] += c.weight * c.mean[d] / k;
                    second[d] += c.weight * (c.mean[d] * c.mean[d] + c.std * c.std) / k;
                }
            }
        }
        let std = mean.iter().zip(&second).map(|(m, s)| (s - m * m).max(0.0).sqrt()).collect();
        (mean, std)
    }

    /// `n` independent draws from one condition, for reference samples.
    pub fn draw_condition(&self, condition: usize, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        let m = self
            .mixtures
            .get(condition)
            .ok_or(Error::Vocabulary { id: condition, size: self.mixtures.len() })?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..n).map(|_| m.draw(&mut rng)).collect())
    }

    /// One condition, one dimension, equal modes at `-separation` and
    /// `+separation`.
    pub fn bimodal(separation: f64, std: f64) -> Self {
        let comp = |m: f64| Component { mean: vec![m], std, weight: 0.5 };
        Self {
            n_content: 1,
            n_speakers: 1,
            data_dim: 1,
            mixtures: vec![Mixture { components: vec![comp(-separation), comp(separation)] }],
            utterance_len: 1,
            seed: 0,
        }
    }

    /// Words on a ring in the plane. Word `w` sits at angle `2 pi w / n` and
    /// is pronounced at either `+spread` or `-spread` degrees around it, with
    /// `spread` cycling through `layout.spreads`; each speaker rotates the
    /// whole layout by a small fixed tilt. Nuisance dimensions follow the two
    /// ring coordinates.
    pub fn ring(layout: &RingLayout) -> Self {
        let mut mixtures = Vec::with_capacity(layout.words * layout.speakers);
        for w in 0..layout.words {
            let centre = 360.0 * w as f64 / layout.words as f64;
            let spread = layout.spreads.get(w % layout.spreads.len().max(1)).copied().unwrap_or(0.0);
            for s in 0..layout.speakers {
                let tilt = layout.speaker_tilt * speaker_offset(s, layout.speakers);
                let comp = |sign: f64| {
                    let a = (centre + sign * spread + tilt).to_radians();
                    let mut mean = vec![layout.radius * a.cos(), layout.radius * a.sin()];
                    mean.resize(2 + layout.nuisance_dims, 0.0);
                    Component { mean, std: layout.std, weight: 0.5 }
                };
                mixtures.push(Mixture { components: vec![comp(1.0), comp(-1.0)] });
            }
        }
        Self {
            n_content: layout.words,
            n_speakers: layout.speakers,
            data_dim: 2 + layout.nuisance_dims,
            mixtures,
            utterance_len: layout.utterance_len,
            seed: 0,
        }
    }
}

/// Evenly spaced in `[-1, 1]`; a single speaker sits at 0.
fn speaker_offset(s: usize, n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        2.0 * s as f64 / (n - 1) as f64 - 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RingLayout {
    pub words: usize,
    pub speakers: usize,
    pub radius: f64,
    /// Degrees between a word's centre and each of its two modes, cycled
    /// over words. A zero spread gives a single-mode word.
    pub spreads: Vec<f64>,
    /// Largest per-speaker rotation in degrees.
    pub speaker_tilt: f64,
    pub std: f64,
    pub utterance_len: usize,
    /// Extra zero-mean dimensions carrying only noise of the same std. They
    /// say nothing about the word, so a recognizer has to learn to ignore them.
    pub nuisance_dims: usize,
}

impl Default for RingLayout {
    fn default() -> Self {
        Self {
            words: 6,
            speakers: 16,
            radius: 3.0,
            spreads: vec![0.0, 40.0],
            speaker_tilt: 6.0,
            std: 0.3,
            utterance_len: 6,
            nuisance_dims: 8,
        }
    }
}

/// One spoken word: its content label, speaker and feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub utterance: usize,
    pub content: usize,
    pub speaker: usize,
    pub condition: usize,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSizes {
    /// Segments for generator training.
    pub generator: usize,
    /// Segments for recognizer training.
    pub recognizer: usize,
    /// Segments for recognizer evaluation.
    pub eval: usize,
}

impl Default for SplitSizes {
    fn default() -> Self {
        Self { generator: 1000, recognizer: 5000, eval: 5000 }
    }
}

/// The three disjoint-transcript splits of one run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub generator: Vec<Segment>,
    pub recognizer: Vec<Segment>,
    pub eval: Vec<Segment>,
    /// Word sequence of every utterance, indexed by `Segment::utterance`.
    pub transcripts: Vec<Vec<usize>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.generator.len() + self.recognizer.len() + self.eval.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Fails if any transcript is used by more than one split.
    pub fn check_split_hygiene(&self) -> Result<()> {
        let mut owner: HashMap<&[usize], usize> = HashMap::new();
        for (k, split) in [&self.generator, &self.recognizer, &self.eval].into_iter().enumerate() {
            let utterances: HashSet<usize> = split.iter().map(|s| s.utterance).collect();
            for u in utterances {
                let t = self.transcripts.get(u).ok_or_else(|| Error::Data(format!("unknown utterance {u}")))?;
                if *owner.entry(t.as_slice()).or_insert(k) != k {
                    return Err(Error::Data(format!("transcript of utterance {u} appears in two splits")));
                }
            }
        }
        Ok(())
    }
}

pub fn as_examples(segments: &[Segment]) -> Vec<Example<f64>> {
    segments.iter().map(|s| Example { x: s.x.clone(), condition: s.condition }).collect()
}

pub fn as_labeled(segments: &[Segment]) -> Vec<Labeled<f64>> {
    segments.iter().map(|s| Labeled { x: s.x.clone(), label: s.content }).collect()
}

const MAX_REJECTIONS: usize = 10_000;

/// Draws the three splits with `speakers` restricted to the first
/// `n_active_speakers` labels. A transcript drawn for one split is never
/// used by another; the last utterance of a split may be shorter.
pub fn gen_dataset_with_speakers(
    spec: &ToyTaskSpec,
    sizes: SplitSizes,
    n_active_speakers: usize,
    seed: u64,
) -> Result<Dataset> {
    spec.validate()?;
    if n_active_speakers == 0 || n_active_speakers > spec.n_speakers {
        return Err(Error::Parameter(format!(
            "active speakers must be in 1..={}, got {n_active_speakers}",
            spec.n_speakers
        )));
    }
    let len = spec.utterance_len;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ds = Dataset::default();
    let mut owner: HashMap<Vec<usize>, usize> = HashMap::new();
    for (k, &size) in [sizes.generator, sizes.recognizer, sizes.eval].iter().enumerate() {
        let mut split = Vec::with_capacity(size);
        while split.len() < size {
            let mut rejected = 0usize;
            let words: Vec<usize> = loop {
                let t: Vec<usize> = (0..len).map(|_| rng.random_range(0..spec.n_content)).collect();
                if *owner.entry(t.clone()).or_insert(k) == k {
                    break t;
                }
                rejected += 1;
                if rejected > MAX_REJECTIONS {
                    return Err(Error::Parameter(format!(
                        "no transcripts left for split {k}; raise utterance_len or n_content"
                    )));
                }
            };
            let speaker = rng.random_range(0..n_active_speakers);
            let utterance = ds.transcripts.len();
            for &content in words.iter().take(size - split.len()) {
                let condition = spec.condition(content, speaker);
                let x = spec.mixtures[condition].draw(&mut rng);
                split.push(Segment { utterance, content, speaker, condition, x });
            }
            ds.transcripts.push(words);
        }
        match k {
            0 => ds.generator = split,
            1 => ds.recognizer = split,
            _ => ds.eval = split,
        }
    }
    ds.check_split_hygiene()?;
    Ok(ds)
}

pub fn gen_dataset(spec: &ToyTaskSpec, sizes: SplitSizes, seed: u64) -> Result<Dataset> {
    gen_dataset_with_speakers(spec, sizes, spec.n_speakers, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_sizes() {
        let spec = ToyTaskSpec::ring(&RingLayout::default());
        let ds = gen_dataset(&spec, SplitSizes { generator: 0, recognizer: 0, eval: 0 }, 1).unwrap();
        assert!(ds.is_empty());
    }

    #[test]
    fn splits_are_clean_and_sized() {
        let spec = ToyTaskSpec::ring(&RingLayout::default());
        let sizes = SplitSizes { generator: 103, recognizer: 60, eval: 31 };
        let ds = gen_dataset(&spec, sizes, 9).unwrap();
        assert_eq!((ds.generator.len(), ds.recognizer.len(), ds.eval.len()), (103, 60, 31));
        ds.check_split_hygiene().unwrap();
        let mut broken = ds.clone();
        broken.eval[0].utterance = broken.generator[0].utterance;
        assert!(broken.check_split_hygiene().is_err());
    }

    #[test]
    fn ring_validates_and_bimodal_mean() {
        ToyTaskSpec::ring(&RingLayout::default()).validate().unwrap();
        let b = ToyTaskSpec::bimodal(1.0, 0.1);
        b.validate().unwrap();
        assert_eq!(b.mixtures[0].mean(), vec![0.0]);
        assert!(b.is_one_to_many());
        let mut single = b.clone();
        single.mixtures[0].components.truncate(1);
        single.mixtures[0].components[0].weight = 1.0;
        assert!(!single.is_one_to_many());
        let only = SplitSizes { generator: 10, recognizer: 0, eval: 0 };
        assert_eq!(gen_dataset(&single, only, 0).unwrap().generator.len(), 10);
        let two = SplitSizes { generator: 10, recognizer: 1, eval: 0 };
        assert!(gen_dataset(&single, two, 0).is_err());
    }
}
