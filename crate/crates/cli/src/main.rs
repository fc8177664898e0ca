use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use oversmooth::eval::{self, Diversity};
use oversmooth::lab::{self, ExperimentConfig, Generator, GeneratorCheckpoint, Manifest, SplitSizes};
use oversmooth::nets::{write_loss_csv, Objective};
use oversmooth::scaling::{self, ScalingFit};
use oversmooth::{Error, Result};

/// Desk-scale MSE-versus-diffusion laboratory.
#[derive(Parser)]
#[command(name = "oversmooth", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment config, or a manifest.json from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed; a run with k seeds uses seed, seed+1, ..., seed+k-1.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw the three data splits of the configured task.
    GenData {
        #[command(flatten)]
        common: Common,
        /// Generator-train segments; defaults to the largest configured size.
        #[arg(long)]
        size: Option<usize>,
    },
    /// Train one generator and save a checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        objective: Option<Objective>,
    },
    /// Generate from a saved checkpoint.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Samples per condition.
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Restrict to one condition id.
        #[arg(long)]
        condition: Option<usize>,
    },
    /// MSE versus diffusion on a multimodal one-dimensional task.
    Oversmooth {
        #[command(flatten)]
        common: Common,
    },
    /// Error-rate ratio versus generator data size, with power-law fits.
    Scaling {
        #[command(flatten)]
        common: Common,
    },
    /// Error-rate ratio across speaker-diversity tiers.
    Diversity {
        #[command(flatten)]
        common: Common,
    },
    /// Fit the two-term power law to a `D,werr[,label]` CSV.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        /// Unit of D recorded in the fit.
        #[arg(long)]
        unit: Option<String>,
    },
    /// Data size at which a fitted curve reaches a target ratio.
    Extrapolate {
        #[command(flatten)]
        common: Common,
        /// A fit.json, or a points CSV to fit first.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        target: f64,
        #[arg(long)]
        unit: Option<String>,
    },
    /// Check every ratio of the reference results table.
    VerifyTable1 {
        #[command(flatten)]
        common: Common,
        /// Alternative table; defaults to the bundled one.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Also write per-model points CSVs ready for `fit`.
        #[arg(long)]
        export_points: bool,
    },
    /// Word error rate of a hypothesis against a reference.
    Wer {
        #[command(flatten)]
        common: Common,
        #[arg(long = "ref")]
        reference: String,
        #[arg(long)]
        hyp: String,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenData { .. } => "gen-data",
            Command::Train { .. } => "train",
            Command::Sample { .. } => "sample",
            Command::Oversmooth { .. } => "oversmooth",
            Command::Scaling { .. } => "scaling",
            Command::Diversity { .. } => "diversity",
            Command::Fit { .. } => "fit",
            Command::Extrapolate { .. } => "extrapolate",
            Command::VerifyTable1 { .. } => "verify-table1",
            Command::Wer { .. } => "wer",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::GenData { common, .. }
            | Command::Train { common, .. }
            | Command::Sample { common, .. }
            | Command::Oversmooth { common }
            | Command::Scaling { common }
            | Command::Diversity { common }
            | Command::Fit { common, .. }
            | Command::Extrapolate { common, .. }
            | Command::VerifyTable1 { common, .. }
            | Command::Wer { common, .. } => common,
        }
    }
}

/// Resolves the config: file (TOML or manifest) or the command default, then
/// the `--seed` and `--out` overrides.
fn resolve_config(command: &Command) -> Result<(ExperimentConfig, PathBuf)> {
    let common = command.common();
    let mut config = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            match serde_json::from_str::<Manifest>(&text) {
                Ok(manifest) => manifest.config()?,
                Err(_) => ExperimentConfig::from_toml(&text)?,
            }
        }
        None if matches!(command, Command::Oversmooth { .. }) => ExperimentConfig::oversmoothing_default(),
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        let k = config.seeds.len() as u64;
        config.seeds = (seed..seed + k).collect();
    }
    let out = common.out.clone().unwrap_or_else(|| config.out_dir.join(command.name()));
    config.out_dir = out.clone();
    config.validate()?;
    Ok((config, out))
}

fn read_input(path: &Path) -> Result<Vec<u8>> {
    Ok(std::fs::read(path)?)
}

fn write_csv_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

#[derive(Serialize)]
struct Extrapolation {
    target: f64,
    dataset_size: f64,
    unit: String,
    round_trip_relative_error: f64,
    fit: ScalingFit<f64>,
    /// Published large-scale estimate of the data needed to reach parity,
    /// in hours, shown for comparison with `dataset_size`.
    published_estimate: f64,
    published_estimate_note: String,
}

#[derive(Serialize)]
struct TableCheck {
    hours: f64,
    diversity: Diversity,
    model: String,
    recomputed: f64,
    printed: f64,
    gap: f64,
    within_tolerance: bool,
}

#[derive(Serialize)]
struct TableReport {
    rows: usize,
    tolerance: f64,
    all_within_tolerance: bool,
    checks: Vec<TableCheck>,
}

fn load_fit_or_points(bytes: &[u8], config: &ExperimentConfig, unit: Option<String>) -> Result<ScalingFit<f64>> {
    if let Ok(fit) = serde_json::from_slice::<ScalingFit<f64>>(bytes) {
        return Ok(fit);
    }
    let points = scaling::read_points_csv(bytes)?;
    let mut options = config.fit.clone();
    if let Some(u) = unit {
        options.unit = u;
    }
    scaling::fit_power_law(&points, &options)
}

fn run(command: Command) -> Result<()> {
    let (config, out) = resolve_config(&command)?;
    std::fs::create_dir_all(&out)?;
    let mut manifest = Manifest::new(command.name(), &config)?;
    let seed = config.seeds[0];
    match command {
        Command::GenData { size, .. } => {
            let spec = config.task.build(seed)?;
            let generator = size.unwrap_or_else(|| *config.train_sizes.iter().max().expect("validated"));
            let sizes = SplitSizes { generator, recognizer: config.recognizer_size, eval: config.eval_size };
            let ds = lab::gen_dataset(&spec, sizes, seed)?;
            lab::write_dataset_csv(&ds, std::fs::File::create(out.join("dataset.csv"))?)?;
            lab::write_json(&out.join("task.json"), &spec)?;
            manifest = manifest.with_arg("size", generator);
        }
        Command::Train { size, objective, .. } => {
            let spec = config.task.build(seed)?;
            let n = size.unwrap_or_else(|| *config.train_sizes.iter().max().expect("validated"));
            let objective = objective.unwrap_or(config.objective);
            let sizes = SplitSizes { generator: n, recognizer: 0, eval: 0 };
            let ds = lab::gen_dataset(&spec, sizes, seed)?;
            let g = Generator::fit(&spec, &ds.generator, objective, &config.generator, lab::derive_seed(seed, &[1]))?;
            std::fs::write(out.join("checkpoint.json"), g.to_checkpoint(&config.generator).to_json()?)?;
            write_loss_csv(&g.curve, std::fs::File::create(out.join("loss.csv"))?)?;
            manifest = manifest.with_arg("size", n).with_arg("objective", objective);
        }
        Command::Sample { checkpoint, n, condition, .. } => {
            let bytes = read_input(&checkpoint)?;
            let text = String::from_utf8(bytes.clone()).map_err(|e| Error::Data(e.to_string()))?;
            let g = Generator::from_checkpoint(GeneratorCheckpoint::from_json(&text)?)?;
            let n_conditions = g.params.topology.n_conditions;
            let conditions: Vec<usize> = match condition {
                Some(c) if c >= n_conditions => return Err(Error::Vocabulary { id: c, size: n_conditions }),
                Some(c) => vec![c; n],
                None => (0..n_conditions).flat_map(|c| std::iter::repeat_n(c, n)).collect(),
            };
            let xs = g.generate(&conditions, seed)?;
            let mut text = String::from("condition");
            for d in 0..g.params.topology.data_dim {
                text.push_str(&format!(",x{d}"));
            }
            text.push('\n');
            for (c, x) in conditions.iter().zip(&xs) {
                text.push_str(&c.to_string());
                for v in x {
                    text.push_str(&format!(",{v}"));
                }
                text.push('\n');
            }
            write_csv_text(&out.join("samples.csv"), &text)?;
            manifest = manifest.with_input("checkpoint", &bytes).with_arg("n", n);
            if let Some(c) = condition {
                manifest = manifest.with_arg("condition", c);
            }
        }
        Command::Oversmooth { .. } => {
            let report = lab::run_oversmoothing_experiment(&config)?;
            lab::write_oversmoothing_outputs(&report, &out)?;
        }
        Command::Scaling { .. } => {
            let report = lab::run_scaling_experiment(&config)?;
            lab::write_scaling_outputs(&report, &out)?;
        }
        Command::Diversity { .. } => {
            let report = lab::run_diversity_experiment(&config)?;
            lab::write_diversity_outputs(&report, &out)?;
        }
        Command::Fit { input, unit, .. } => {
            let bytes = read_input(&input)?;
            let points = scaling::read_points_csv(bytes.as_slice())?;
            let mut options = config.fit.clone();
            if let Some(u) = &unit {
                options.unit = u.clone();
            }
            let fit = scaling::fit_power_law(&points, &options)?;
            lab::write_json(&out.join("fit.json"), &fit)?;
            manifest = manifest.with_input("input", &bytes).with_arg("unit", &options.unit);
        }
        Command::Extrapolate { input, target, unit, .. } => {
            let bytes = read_input(&input)?;
            let fit = load_fit_or_points(&bytes, &config, unit)?;
            let d = scaling::extrapolate_to_target(&fit, target)?;
            let back = scaling::predict(&fit, d)?;
            let report = Extrapolation {
                target,
                dataset_size: d,
                unit: fit.unit.clone(),
                round_trip_relative_error: (back - target).abs() / target,
                fit,
                published_estimate: 1e6,
                published_estimate_note: "at least a million hours of synthetic data to match real-data training".into(),
            };
            lab::write_json(&out.join("extrapolation.json"), &report)?;
            manifest = manifest.with_input("input", &bytes).with_arg("target", target);
        }
        Command::VerifyTable1 { input, export_points, .. } => {
            let bytes = match &input {
                Some(p) => read_input(p)?,
                None => eval::bundled_table_csv().as_bytes().to_vec(),
            };
            let records = eval::load_results_table(bytes.as_slice())?;
            let mut checks = Vec::new();
            for r in &records {
                for model in [Objective::Ddpm, Objective::Mse] {
                    let gap = r.ratio_gap(model)?;
                    checks.push(TableCheck {
                        hours: r.hours,
                        diversity: r.diversity,
                        model: model.to_string(),
                        recomputed: r.werr(model) + gap,
                        printed: r.werr(model),
                        gap,
                        within_tolerance: gap.abs() <= eval::RATIO_TOLERANCE,
                    });
                }
            }
            let report = TableReport {
                rows: records.len(),
                tolerance: eval::RATIO_TOLERANCE,
                all_within_tolerance: checks.iter().all(|c| c.within_tolerance),
                checks,
            };
            lab::write_json(&out.join("table1_report.json"), &report)?;
            if export_points {
                for model in [Objective::Ddpm, Objective::Mse] {
                    for (suffix, div) in [("all", None), ("high", Some(Diversity::High))] {
                        let mut text = String::from("D,werr,label\n");
                        for p in eval::select_points(&records, model, div) {
                            text.push_str(&format!("{},{},{}\n", p.dataset_size, p.werr, p.label.unwrap_or_default()));
                        }
                        write_csv_text(&out.join(format!("table1_{model}_{suffix}.csv")), &text)?;
                    }
                }
            }
            manifest = manifest.with_input("table", &bytes).with_arg("export_points", export_points);
            eprintln!("{} rows validated", records.len());
        }
        Command::Wer { reference, hyp, .. } => {
            let stats = eval::word_error_rate(&eval::tokenize(&reference), &eval::tokenize(&hyp))?;
            lab::write_json(&out.join("wer.json"), &stats)?;
            println!("{}", serde_json::to_string(&stats)?);
            manifest = manifest.with_arg("ref", reference).with_arg("hyp", hyp);
        }
    }
    lab::write_json(&out.join("manifest.json"), &manifest)?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
