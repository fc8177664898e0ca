//! Error-rate metrics, distribution distances for toy generators and the
//! bundled reference results table.

mod metrics;
mod table;
mod wer;

pub use metrics::{mode_coverage, wasserstein1, ModeCoverage};
pub use table::{
    bundled_table, bundled_table_csv, load_results_table, select_points, Diversity, WerrRecord, RATIO_TOLERANCE,
};
pub use wer::{tokenize, werr, word_error_rate, WerStats};
