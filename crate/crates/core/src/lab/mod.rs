//! Toy tasks, the train-generator / train-recognizer / compare loop and
//! experiment orchestration.

mod config;
mod experiments;
mod output;
mod pipeline;
mod task;

pub use config::{DiversityConfig, ExperimentConfig, OversmoothingConfig, TaskConfig};
pub use experiments::{
    derive_seed, run_diversity_experiment, run_oversmoothing_experiment, run_scaling_experiment, ConditionReport,
    Crossover, DiversityCell, DiversityGap, DiversityReport, Leg, MedianPoint, OversmoothingReport, ScalingReport,
    RATIO_METRIC,
};
pub use output::{
    sha256_hex, write_dataset_csv, write_diversity_outputs, write_json, write_oversmoothing_outputs,
    write_scaling_outputs, Manifest,
};
pub use pipeline::{
    fit_recognizer, GeneratorCheckpoint, utterance_error_rate, Generator, GeneratorConfig, Normalizer, RecognizerConfig, ScheduleConfig,
};
pub use task::{
    as_examples, as_labeled, gen_dataset, gen_dataset_with_speakers, Component, Dataset, Mixture, RingLayout,
    Segment, SplitSizes, ToyTaskSpec,
};
