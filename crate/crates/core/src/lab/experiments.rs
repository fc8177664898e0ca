use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::pipeline::{fit_recognizer, utterance_error_rate, Generator};
use super::task::{as_labeled, gen_dataset_with_speakers, Dataset, SplitSizes, ToyTaskSpec};
use crate::eval::{mode_coverage, wasserstein1, werr, ModeCoverage};
use crate::nets::Objective;
use crate::scaling::{fit_power_law, ScalingFit, ScalingPoint};
use crate::{Error, Result};

/// Label attached to every ratio the toy pipeline reports.
pub const RATIO_METRIC: &str = "error-rate ratio (toy word classifier)";

/// Mixes a base seed with leg coordinates so every leg draws from its own
/// stream regardless of execution order.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut z = base;
    for &t in tags {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(t.wrapping_mul(0xD1B5_4A32_D192_ED03));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

fn objective_tag(o: Objective) -> u64 {
    match o {
        Objective::Mse => 1,
        Objective::Ddpm => 2,
    }
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 { values[mid] } else { 0.5 * (values[mid - 1] + values[mid]) })
}

// ---------------------------------------------------------------- oversmoothing

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: usize,
    pub modes: Vec<f64>,
    pub analytic_mean: f64,
    pub mse_prediction: Option<f64>,
    pub mse_mean_distance: Option<f64>,
    pub mse_w1: Option<f64>,
    pub ddpm_coverage: Option<ModeCoverage>,
    pub ddpm_w1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OversmoothingReport {
    pub seed: u64,
    pub train_size: usize,
    pub n_samples: usize,
    pub radius: f64,
    pub conditions: Vec<ConditionReport>,
    /// Objectives whose training failed, with the reason.
    pub flagged: BTreeMap<String, String>,
    /// Generated values per objective and condition, for plotting.
    #[serde(skip)]
    pub samples: Vec<(Objective, usize, Vec<f64>)>,
}

/// Trains both generators on the same one-dimensional task and compares
/// each with the true conditional distribution.
pub fn run_oversmoothing_experiment(config: &ExperimentConfig) -> Result<OversmoothingReport> {
    config.validate()?;
    let seed = config.seeds[0];
    let spec = config.task.build(seed)?;
    if spec.data_dim != 1 {
        return Err(Error::Config("the oversmoothing experiment needs a one-dimensional task".into()));
    }
    let os = &config.oversmoothing;
    let sizes = SplitSizes { generator: os.train_size, recognizer: 0, eval: 0 };
    let data = gen_dataset_with_speakers(&spec, sizes, spec.n_speakers, seed)?;
    let mut report = OversmoothingReport {
        seed,
        train_size: os.train_size,
        n_samples: os.n_samples,
        radius: os.radius,
        conditions: Vec::new(),
        flagged: BTreeMap::new(),
        samples: Vec::new(),
    };
    let mut generators = BTreeMap::new();
    for objective in [Objective::Mse, Objective::Ddpm] {
        let gseed = derive_seed(seed, &[objective_tag(objective)]);
        match Generator::fit(&spec, &data.generator, objective, &config.generator, gseed) {
            Ok(g) => {
                generators.insert(objective, g);
            }
            Err(e @ Error::Divergence { .. }) => {
                report.flagged.insert(objective.to_string(), e.to_string());
            }
            Err(e) => return Err(e),
        }
    }
    for (c, mixture) in spec.mixtures.iter().enumerate() {
        let truth: Vec<f64> = spec
            .draw_condition(c, os.n_samples, derive_seed(seed, &[100, c as u64]))?
            .into_iter()
            .map(|x| x[0])
            .collect();
        let modes: Vec<f64> = mixture.components.iter().map(|m| m.mean[0]).collect();
        let analytic_mean = mixture.mean()[0];
        let mut row = ConditionReport {
            condition: c,
            modes: modes.clone(),
            analytic_mean,
            mse_prediction: None,
            mse_mean_distance: None,
            mse_w1: None,
            ddpm_coverage: None,
            ddpm_w1: None,
        };
        if let Some(g) = generators.get(&Objective::Mse) {
            let p = g.generate(&[c], 0)?[0][0];
            row.mse_prediction = Some(p);
            row.mse_mean_distance = Some((p - analytic_mean).abs());
            row.mse_w1 = Some(wasserstein1(&vec![p; truth.len()], &truth)?);
            report.samples.push((Objective::Mse, c, vec![p]));
        }
        if let Some(g) = generators.get(&Objective::Ddpm) {
            let xs: Vec<f64> = g
                .generate(&vec![c; os.n_samples], derive_seed(seed, &[200, c as u64]))?
                .into_iter()
                .map(|x| x[0])
                .collect();
            row.ddpm_coverage = Some(mode_coverage(&xs, &modes, os.radius)?);
            row.ddpm_w1 = Some(wasserstein1(&xs, &truth)?);
            report.samples.push((Objective::Ddpm, c, xs));
        }
        report.conditions.push(row);
    }
    Ok(report)
}

// ---------------------------------------------------------------------- scaling

/// One `(objective, D, seed)` leg; `ratio` is `None` when the leg failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub objective: String,
    #[serde(rename = "D")]
    pub dataset_size: usize,
    pub seed: u64,
    pub error_rate: Option<f64>,
    pub ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianPoint {
    pub objective: String,
    #[serde(rename = "D")]
    pub dataset_size: usize,
    pub ratio: f64,
    pub n_valid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crossover {
    pub smallest_d: usize,
    pub largest_d: usize,
    pub mse_le_ddpm_at_smallest: bool,
    pub ddpm_le_mse_at_largest: bool,
    pub gamma_ddpm_gt_gamma_mse: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub metric: String,
    pub unit: String,
    /// Real-data error rate per seed.
    pub real_error_rates: BTreeMap<u64, f64>,
    pub legs: Vec<Leg>,
    pub medians: Vec<MedianPoint>,
    pub fits: BTreeMap<String, ScalingFit<f64>>,
    pub fit_errors: BTreeMap<String, String>,
    pub crossover: Option<Crossover>,
}

impl ScalingReport {
    pub fn median(&self, objective: Objective, d: usize) -> Option<f64> {
        let name = objective.to_string();
        self.medians.iter().find(|m| m.objective == name && m.dataset_size == d).map(|m| m.ratio)
    }
}

struct RealBaseline {
    data: Dataset,
    error_rate: f64,
    recognizer_seed: u64,
}

fn real_baseline(
    spec: &ToyTaskSpec,
    config: &ExperimentConfig,
    max_d: usize,
    speakers: usize,
    seed: u64,
) -> Result<RealBaseline> {
    let sizes = SplitSizes { generator: max_d, recognizer: config.recognizer_size, eval: config.eval_size };
    let data = gen_dataset_with_speakers(spec, sizes, speakers, seed)?;
    let recognizer_seed = derive_seed(seed, &[7]);
    let real = fit_recognizer(&as_labeled(&data.recognizer), spec.n_content, &config.recognizer, recognizer_seed)?;
    let error_rate = utterance_error_rate(&real, &data.eval)?;
    Ok(RealBaseline { data, error_rate, recognizer_seed })
}

/// Generator on `D` segments, synthetic recognizer-train set, recognizer,
/// real eval. Returns the synthetic error rate and its ratio to the real one.
fn run_leg(
    spec: &ToyTaskSpec,
    config: &ExperimentConfig,
    base: &RealBaseline,
    objective: Objective,
    d: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let gseed = derive_seed(seed, &[objective_tag(objective), d as u64]);
    let generator = Generator::fit(spec, &base.data.generator[..d], objective, &config.generator, gseed)?;
    let synthetic = generator.synthesize(&base.data.recognizer, derive_seed(gseed, &[1]))?;
    let recognizer = fit_recognizer(&synthetic, spec.n_content, &config.recognizer, base.recognizer_seed)?;
    let err = utterance_error_rate(&recognizer, &base.data.eval)?;
    Ok((err, werr(err, base.error_rate)?))
}

fn leg_or_missing(objective: &str, d: usize, seed: u64, result: Result<(f64, f64)>) -> Result<Leg> {
    match result {
        Ok((err, ratio)) => {
            Ok(Leg { objective: objective.into(), dataset_size: d, seed, error_rate: Some(err), ratio: Some(ratio), note: None })
        }
        Err(e) if !e.is_validation() || matches!(e, Error::Parameter(_)) => Ok(Leg {
            objective: objective.into(),
            dataset_size: d,
            seed,
            error_rate: None,
            ratio: None,
            note: Some(e.to_string()),
        }),
        Err(e) => Err(e),
    }
}

fn medians_of(legs: &[Leg]) -> Vec<MedianPoint> {
    let mut groups: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
    for leg in legs {
        let entry = groups.entry((leg.objective.clone(), leg.dataset_size)).or_default();
        if let Some(r) = leg.ratio {
            entry.push(r);
        }
    }
    groups
        .into_iter()
        .filter_map(|((objective, d), mut v)| {
            let n_valid = v.len();
            median(&mut v).map(|ratio| MedianPoint { objective, dataset_size: d, ratio, n_valid })
        })
        .collect()
}

/// The full sweep: both objectives, every `D` and seed, median ratios, a
/// power-law fit per objective and the crossover checks.
pub fn run_scaling_experiment(config: &ExperimentConfig) -> Result<ScalingReport> {
    config.validate()?;
    let spec = config.task.build(config.seeds[0])?;
    let max_d = *config.train_sizes.iter().max().expect("validated non-empty");
    let mut legs = Vec::new();
    let mut real_error_rates = BTreeMap::new();
    for &seed in &config.seeds {
        let base = match real_baseline(&spec, config, max_d, spec.n_speakers, seed) {
            Ok(b) if b.error_rate > 0.0 => b,
            Ok(_) | Err(Error::Divergence { .. }) => {
                for objective in ["real", "mse", "ddpm"] {
                    for &d in &config.train_sizes {
                        let note = Some(format!("real baseline unusable for seed {seed}"));
                        legs.push(Leg { objective: objective.into(), dataset_size: d, seed, error_rate: None, ratio: None, note });
                    }
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        real_error_rates.insert(seed, base.error_rate);
        for &d in &config.train_sizes {
            let control = werr(base.error_rate, base.error_rate)?;
            legs.push(Leg {
                objective: "real".into(),
                dataset_size: d,
                seed,
                error_rate: Some(base.error_rate),
                ratio: Some(control),
                note: None,
            });
            for objective in [Objective::Mse, Objective::Ddpm] {
                let result = run_leg(&spec, config, &base, objective, d, seed);
                legs.push(leg_or_missing(&objective.to_string(), d, seed, result)?);
            }
        }
    }
    let medians = medians_of(&legs);
    let mut fits = BTreeMap::new();
    let mut fit_errors = BTreeMap::new();
    for objective in [Objective::Mse, Objective::Ddpm] {
        let name = objective.to_string();
        let points: Vec<ScalingPoint<f64>> = medians
            .iter()
            .filter(|m| m.objective == name)
            .map(|m| ScalingPoint { dataset_size: m.dataset_size as f64, werr: m.ratio, label: None })
            .collect();
        match fit_power_law(&points, &config.fit) {
            Ok(f) => {
                fits.insert(name, f);
            }
            Err(e) => {
                fit_errors.insert(name, e.to_string());
            }
        }
    }
    let mut report = ScalingReport {
        metric: RATIO_METRIC.into(),
        unit: config.fit.unit.clone(),
        real_error_rates,
        legs,
        medians,
        fits,
        fit_errors,
        crossover: None,
    };
    let smallest = *config.train_sizes.iter().min().expect("non-empty");
    let at = |o, d| report.median(o, d);
    if let (Some(ms), Some(ds), Some(ml), Some(dl)) =
        (at(Objective::Mse, smallest), at(Objective::Ddpm, smallest), at(Objective::Mse, max_d), at(Objective::Ddpm, max_d))
    {
        let gamma = match (report.fits.get("ddpm"), report.fits.get("mse")) {
            (Some(fd), Some(fm)) => Some(fd.gamma > fm.gamma),
            _ => None,
        };
        report.crossover = Some(Crossover {
            smallest_d: smallest,
            largest_d: max_d,
            mse_le_ddpm_at_smallest: ms <= ds,
            ddpm_le_mse_at_largest: dl <= ml,
            gamma_ddpm_gt_gamma_mse: gamma,
        });
    }
    Ok(report)
}

// -------------------------------------------------------------------- diversity

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityCell {
    pub objective: String,
    #[serde(rename = "D")]
    pub dataset_size: usize,
    pub tier: usize,
    pub speakers: usize,
    pub ratios: Vec<Option<f64>>,
    pub median: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityGap {
    pub objective: String,
    #[serde(rename = "D")]
    pub dataset_size: usize,
    pub lowest_tier: f64,
    pub highest_tier: f64,
    /// `|lowest - highest| / lowest`.
    pub relative_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub metric: String,
    pub seeds: Vec<u64>,
    pub cells: Vec<DiversityCell>,
    pub gaps: Vec<DiversityGap>,
}

/// Fixed generator data per size, varying how many speaker labels the three
/// splits draw from.
pub fn run_diversity_experiment(config: &ExperimentConfig) -> Result<DiversityReport> {
    config.validate()?;
    let spec = config.task.build(config.seeds[0])?;
    let tiers = &config.diversity.tiers;
    if let Some(&t) = tiers.iter().find(|&&t| t == 0 || t > spec.n_speakers) {
        return Err(Error::Config(format!("tier of {t} speakers outside 1..={}", spec.n_speakers)));
    }
    let max_d = *config.diversity.train_sizes.iter().max().expect("validated non-empty");
    let mut ratios: BTreeMap<(String, usize, usize), Vec<Option<f64>>> = BTreeMap::new();
    for (tier, &speakers) in tiers.iter().enumerate() {
        for &seed in &config.seeds {
            let tier_seed = derive_seed(seed, &[300, tier as u64]);
            let base = real_baseline(&spec, config, max_d, speakers, tier_seed)
                .ok()
                .filter(|b| b.error_rate > 0.0);
            for &d in &config.diversity.train_sizes {
                for objective in [Objective::Mse, Objective::Ddpm] {
                    let r = base
                        .as_ref()
                        .and_then(|b| run_leg(&spec, config, b, objective, d, tier_seed).ok())
                        .map(|(_, r)| r);
                    ratios.entry((objective.to_string(), d, tier)).or_default().push(r);
                }
            }
        }
    }
    let cells: Vec<DiversityCell> = ratios
        .into_iter()
        .map(|((objective, d, tier), rs)| {
            let mut valid: Vec<f64> = rs.iter().flatten().copied().collect();
            DiversityCell { objective, dataset_size: d, tier, speakers: tiers[tier], median: median(&mut valid), ratios: rs }
        })
        .collect();
    let mut gaps = Vec::new();
    let last = tiers.len() - 1;
    for objective in ["mse", "ddpm"] {
        for &d in &config.diversity.train_sizes {
            let find = |t: usize| {
                cells.iter().find(|c| c.objective == objective && c.dataset_size == d && c.tier == t).and_then(|c| c.median)
            };
            if let (Some(lo), Some(hi)) = (find(0), find(last)) {
                gaps.push(DiversityGap {
                    objective: objective.into(),
                    dataset_size: d,
                    lowest_tier: lo,
                    highest_tier: hi,
                    relative_gap: (lo - hi).abs() / lo,
                });
            }
        }
    }
    Ok(DiversityReport { metric: RATIO_METRIC.into(), seeds: config.seeds.clone(), cells, gaps })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_differ_by_tag() {
        assert_ne!(derive_seed(1, &[2]), derive_seed(1, &[3]));
        assert_ne!(derive_seed(1, &[2, 3]), derive_seed(1, &[3, 2]));
        assert_eq!(derive_seed(5, &[1, 2]), derive_seed(5, &[1, 2]));
    }

    #[test]
    fn median_cases() {
        assert_eq!(median(&mut []), None);
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), Some(2.5));
    }
}
