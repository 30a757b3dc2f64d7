//! Experiment plumbing: configs, the training loop for every mode, run
//! artifacts, drop-rate curves and summaries.

mod clock;
pub mod config;
mod curve;
mod engine;
mod report;

pub use self::config::{DatasetConfig, DatasetSource, Mode, RunConfig};
pub use self::curve::{
    curve_from_histogram, drop_curve, drop_point, probe_grid, probe_histograms, write_curve_csv,
    CurvePoint,
};
pub use self::engine::{prepare_data, Engine, EpochMetrics, EpochTiming};
pub use self::report::{
    compare, read_summary, run, run_observed, summarize, summarize_records, train, train_engine, RunReport,
    RunSummary, TableFormat, AUDIT_FILE, CHECKPOINT_STEM, CONFIG_FILE, LAST_EPOCHS, METRICS_FILE,
    SUMMARY_FILE, TIMING_FILE,
};
