use std::io::Read;

use serde::{Deserialize, Serialize};

use super::werr;
use crate::nets::Objective;
use crate::scaling::ScalingPoint;
use crate::{Error, Result};

/// Largest accepted gap between a recomputed ratio and the printed one; the
/// printed error rates carry three significant figures.
pub const RATIO_TOLERANCE: f64 = 0.02;

const BUNDLED: &str = include_str!("../../data/table1.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Diversity {
    Low,
    Medium,
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WerrRecord {
    pub hours: f64,
    pub diversity: Diversity,
    pub speakers: u32,
    #[serde(rename = "wer_ddpm")]
    pub wer_synth_ddpm: f64,
    #[serde(rename = "wer_mse")]
    pub wer_synth_mse: f64,
    pub wer_real: f64,
    pub werr_ddpm: f64,
    pub werr_mse: f64,
}

impl WerrRecord {
    pub fn werr(&self, model: Objective) -> f64 {
        match model {
            Objective::Ddpm => self.werr_ddpm,
            Objective::Mse => self.werr_mse,
        }
    }

    pub fn wer_synth(&self, model: Objective) -> f64 {
        match model {
            Objective::Ddpm => self.wer_synth_ddpm,
            Objective::Mse => self.wer_synth_mse,
        }
    }

    /// `wer_synth / wer_real - printed ratio` for one model.
    pub fn ratio_gap(&self, model: Objective) -> Result<f64> {
        Ok(werr(self.wer_synth(model), self.wer_real)? - self.werr(model))
    }

    fn validate(&self, row: usize) -> Result<()> {
        let values = [
            self.hours,
            self.wer_synth_ddpm,
            self.wer_synth_mse,
            self.wer_real,
            self.werr_ddpm,
            self.werr_mse,
        ];
        if values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) || self.speakers == 0 {
            return Err(Error::Data(format!("row {row}: all fields must be positive")));
        }
        for model in [Objective::Ddpm, Objective::Mse] {
            let gap = self.ratio_gap(model)?;
            if gap.abs() > RATIO_TOLERANCE {
                return Err(Error::Data(format!(
                    "row {row} ({} h, {:?}): {model} ratio off by {gap:.4}",
                    self.hours, self.diversity
                )));
            }
        }
        Ok(())
    }
}

/// Parses and validates a results table. Rows are numbered from 1, header
/// excluded.
pub fn load_results_table<R: Read>(input: R) -> Result<Vec<WerrRecord>> {
    let mut records = Vec::new();
    for (i, row) in csv::Reader::from_reader(input).deserialize().enumerate() {
        let rec: WerrRecord = row.map_err(|e| Error::Data(format!("row {}: {e}", i + 1)))?;
        rec.validate(i + 1)?;
        records.push(rec);
    }
    Ok(records)
}

/// The bundled sixteen-row table.
pub fn bundled_table() -> Result<Vec<WerrRecord>> {
    load_results_table(BUNDLED.as_bytes())
}

pub fn bundled_table_csv() -> &'static str {
    BUNDLED
}

/// `(hours, werr)` points for one model, optionally restricted to a diversity
/// tier.
pub fn select_points(
    records: &[WerrRecord],
    model: Objective,
    diversity: Option<Diversity>,
) -> Vec<ScalingPoint<f64>> {
    records
        .iter()
        .filter(|r| diversity.is_none_or(|d| d == r.diversity))
        .map(|r| ScalingPoint {
            dataset_size: r.hours,
            werr: r.werr(model),
            label: Some(format!("{model}-{:?}", r.diversity).to_lowercase()),
        })
        .collect()
}
