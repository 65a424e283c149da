//! The evaluation protocol: seeded stratified splits shared across the
//! four model variants, six-epoch training runs with min-test-loss epoch
//! selection, repeated-trial sampling distributions, Welch significance
//! tests, synthetic dataset generation, and report rendering.

mod metrics;
mod report;
mod simdiff;
mod split;
mod stats;
mod synth;
mod trial;


use thiserror::Error;

pub use metrics::{accuracy, macro_f1, weighted_f1};
pub use report::{
    read_results_csv, render_f1_histogram_svg, report_from_rows, results_csv_string, stats_text,
    summary_text, table_text, write_results_csv, f1_to_x, CsvRow, F1Samples, ReportData,
    RESULTS_CSV_HEADER,
};
pub use simdiff::{similar_vs_different, SimilarDifferentReport};
pub use split::{split_trial, SplitIndices};
pub use stats::{
    ln_gamma, regularized_incomplete_beta, t_survival, welch_one_sided_greater, WelchTest,
};
pub use synth::{
    default_genre_specs, render_clip, synth_dataset, NoiseColor, RenderedClip, SynthGenreSpec,
    CLIP_LEN, DEFAULT_DIFFERENT_PAIR, DEFAULT_SIMILAR_PAIR,
};
pub use trial::{
    f1_bin, run_experiment, run_trial, select_epoch, summarize, train_and_evaluate, EpochRecord,
    ExperimentSummary, ModelSummary, PValue, TrialFailure, TrialOutcome, TrialProtocol,
    TrialResult, TrialRun, VariantFeatures, F1_HISTOGRAM_BINS,
};

use crate::audio_io::AudioError;
use crate::features::FeatureError;
use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("stratification error: {0}")]
    Stratification(String),
    #[error("summary error: {0}")]
    Summary(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("results format error: {0}")]
    Results(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}
