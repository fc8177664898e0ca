use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::experiments::{DiversityReport, OversmoothingReport, ScalingReport};
use super::task::Dataset;
use crate::Result;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Everything needed to reproduce a run byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    /// The fully resolved config, as TOML.
    pub config: String,
    pub seeds: Vec<u64>,
    /// Command-specific arguments beyond the config.
    pub args: BTreeMap<String, String>,
    /// SHA-256 of every input file read by the run.
    pub inputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, config: &ExperimentConfig) -> Result<Self> {
        let text = config.to_toml()?;
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_sha256: sha256_hex(text.as_bytes()),
            config: text,
            seeds: config.seeds.clone(),
            args: BTreeMap::new(),
            inputs: BTreeMap::new(),
        })
    }

    pub fn with_arg(mut self, key: &str, value: impl ToString) -> Self {
        self.args.insert(key.into(), value.to_string());
        self
    }

    pub fn with_input(mut self, name: &str, bytes: &[u8]) -> Self {
        self.inputs.insert(name.into(), sha256_hex(bytes));
        self
    }

    /// The config embedded in the manifest.
    pub fn config(&self) -> Result<ExperimentConfig> {
        ExperimentConfig::from_toml(&self.config)
    }
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `curve.csv`, `fit.json` and `report.json`.
pub fn write_scaling_outputs(report: &ScalingReport, dir: &Path) -> Result<()> {
    let mut w = csv_writer(&dir.join("curve.csv"))?;
    w.write_record(["objective", "D", "seed", "ratio"])?;
    for leg in &report.legs {
        w.write_record([leg.objective.clone(), leg.dataset_size.to_string(), leg.seed.to_string(), opt(leg.ratio)])?;
    }
    w.flush()?;
    write_json(&dir.join("fit.json"), &report.fits)?;
    write_json(&dir.join("report.json"), report)
}

/// `report.json` and `samples.csv` (`objective,condition,x`).
pub fn write_oversmoothing_outputs(report: &OversmoothingReport, dir: &Path) -> Result<()> {
    let mut w = csv_writer(&dir.join("samples.csv"))?;
    w.write_record(["objective", "condition", "x"])?;
    for (objective, c, xs) in &report.samples {
        for x in xs {
            w.write_record([objective.to_string(), c.to_string(), x.to_string()])?;
        }
    }
    w.flush()?;
    write_json(&dir.join("report.json"), report)
}

/// `report.json` and `curve.csv` with one row per leg and tier.
pub fn write_diversity_outputs(report: &DiversityReport, dir: &Path) -> Result<()> {
    let mut w = csv_writer(&dir.join("curve.csv"))?;
    w.write_record(["objective", "D", "seed", "ratio", "tier", "speakers"])?;
    for cell in &report.cells {
        for (seed, r) in report.seeds.iter().zip(&cell.ratios) {
            w.write_record([
                cell.objective.clone(),
                cell.dataset_size.to_string(),
                seed.to_string(),
                opt(*r),
                cell.tier.to_string(),
                cell.speakers.to_string(),
            ])?;
        }
    }
    w.flush()?;
    write_json(&dir.join("report.json"), report)
}

/// One row per segment: `split,utterance,speaker,content,condition,x0,...`.
pub fn write_dataset_csv<W: Write>(ds: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let dim = [&ds.generator, &ds.recognizer, &ds.eval].iter().flat_map(|s| s.first()).map(|s| s.x.len()).next();
    let mut header: Vec<String> = ["split", "utterance", "speaker", "content", "condition"].map(String::from).to_vec();
    header.extend((0..dim.unwrap_or(0)).map(|d| format!("x{d}")));
    w.write_record(&header)?;
    for (name, split) in [("generator", &ds.generator), ("recognizer", &ds.recognizer), ("eval", &ds.eval)] {
        for s in split {
            let mut row = vec![
                name.to_string(),
                s.utterance.to_string(),
                s.speaker.to_string(),
                s.content.to_string(),
                s.condition.to_string(),
            ];
            row.extend(s.x.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_hash_tracks_config() {
        let a = Manifest::new("scaling", &ExperimentConfig::default()).unwrap();
        let mut c = ExperimentConfig::default();
        c.seeds = vec![9];
        let b = Manifest::new("scaling", &c).unwrap();
        assert_ne!(a.config_sha256, b.config_sha256);
        assert_eq!(a.config().unwrap(), ExperimentConfig::default());
        assert_eq!(sha256_hex(b"abc").len(), 64);
    }
}
