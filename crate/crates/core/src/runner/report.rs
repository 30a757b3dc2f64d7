use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{Mode, RunConfig};
use super::engine::{prepare_data, Engine, EpochMetrics, EpochTiming};
use crate::error::{argument, state, Error, Result};
use crate::nn::checkpoint::save_checkpoint;
use crate::selector::TauSource;

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const TIMING_FILE: &str = "timing.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.json";
pub const AUDIT_FILE: &str = "label_audit.csv";
pub const CHECKPOINT_STEM: &str = "model";
const PARTIAL_SUFFIX: &str = ".partial";

/// Averages are taken over this many final epochs (fewer if the run is shorter).
pub const LAST_EPOCHS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: Option<Mode>,
    pub epochs: usize,
    pub avg_test_acc_last10: f64,
    pub final_test_accuracy: f64,
    pub final_tau_est: Option<f64>,
    pub tau_source: Option<TauSource>,
    /// Epoch at which the noise-rate estimate fired during training.
    pub estimated_at_epoch: Option<usize>,
    /// Noise rate actually applied to the training labels.
    pub true_noise_rate: Option<f64>,
    pub final_zeta: Option<f64>,
    pub total_wall_time_seconds: Option<f64>,
}

impl RunSummary {
    pub fn tau_error(&self) -> Option<f64> {
        Some((self.final_tau_est? - self.true_noise_rate?).abs())
    }
}

/// Summary fields derivable from the metrics alone.
pub fn summarize_records(records: &[EpochMetrics]) -> Result<RunSummary> {
    let last = records
        .last()
        .ok_or_else(|| argument("cannot summarize a run with no epochs"))?;
    let tail = &records[records.len().saturating_sub(LAST_EPOCHS)..];
    let avg = tail.iter().map(|m| m.test_accuracy).sum::<f64>() / tail.len() as f64;
    Ok(RunSummary {
        mode: None,
        epochs: records.len(),
        avg_test_acc_last10: avg,
        final_test_accuracy: last.test_accuracy,
        final_tau_est: last.tau_est,
        tau_source: None,
        estimated_at_epoch: None,
        true_noise_rate: None,
        final_zeta: last.zeta,
        total_wall_time_seconds: None,
    })
}

fn total_time(timings: &[EpochTiming]) -> Option<f64> {
    timings.iter().map(|t| t.wall_time_seconds).sum()
}

/// In-memory result of a run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub metrics: Vec<EpochMetrics>,
    pub timings: Vec<EpochTiming>,
    pub summary: RunSummary,
    pub engine: Engine,
}

/// Trains without touching the filesystem beyond loading the dataset.
/// `on_epoch` sees each epoch as it completes.
pub fn train(
    config: &RunConfig,
    on_epoch: impl FnMut(&Engine, &EpochMetrics, &EpochTiming) -> Result<()>,
) -> Result<RunReport> {
    let (train_set, test_set) = prepare_data(config)?;
    train_engine(Engine::new(config.clone(), train_set, test_set)?, on_epoch)
}

/// Runs `engine` through its remaining epochs.
pub fn train_engine(
    mut engine: Engine,
    mut on_epoch: impl FnMut(&Engine, &EpochMetrics, &EpochTiming) -> Result<()>,
) -> Result<RunReport> {
    let (mut metrics, mut timings) = (Vec::new(), Vec::new());
    while !engine.is_finished() {
        let (m, t) = engine
            .run_epoch()
            .map_err(|e| e.with_context(format!("epoch {}", engine.epoch() + 1)))?;
        on_epoch(&engine, &m, &t)?;
        metrics.push(m);
        timings.push(t);
    }
    let config = engine.config();
    let mut summary = summarize_records(&metrics)?;
    summary.mode = Some(config.mode);
    summary.true_noise_rate = Some(config.noise.rate);
    summary.total_wall_time_seconds = total_time(&timings);
    if let Some(s) = engine.selector_state() {
        summary.tau_source = s.tau_source;
        summary.estimated_at_epoch = s.estimated_at_epoch;
    }
    Ok(RunReport {
        metrics,
        timings,
        summary,
        engine,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_json_line<T: Serialize>(out: &mut impl Write, path: &Path, value: &T) -> Result<()> {
    let line = serde_json::to_string(value).map_err(|e| Error::Format(e.to_string()))?;
    writeln!(out, "{line}")
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Error::Format(e.to_string()))?;
    writeln!(out).and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
}

fn partial(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(PARTIAL_SUFFIX);
    PathBuf::from(name)
}

/// Executes a run and writes its artifacts to `config.output_dir`:
/// `config.json`, `label_audit.csv`, `metrics.jsonl`, `timing.jsonl`,
/// `hist_epoch_<T>.csv` for each snapshot epoch, `summary.json` and the
/// `model.json` / `model.bin` checkpoint.
///
/// Metrics are streamed to `metrics.jsonl.partial`, which is renamed only
/// after the last epoch; a leftover `.partial` file marks an incomplete run.
pub fn run(config: &RunConfig) -> Result<RunSummary> {
    run_observed(config, |_| {})
}

/// [`run`], calling `on_epoch` after each epoch's metrics are written.
pub fn run_observed(config: &RunConfig, on_epoch: impl FnMut(&EpochMetrics)) -> Result<RunSummary> {
    let dir = &config.output_dir;
    run_inner(config, on_epoch).map_err(|e| e.with_context(format!("run into {}", dir.display())))
}

fn run_inner(config: &RunConfig, mut on_epoch: impl FnMut(&EpochMetrics)) -> Result<RunSummary> {
    let dir = config.output_dir.as_path();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let metrics_path = dir.join(METRICS_FILE);
    let partial_path = partial(&metrics_path);
    for stale in [&metrics_path, &dir.join(SUMMARY_FILE)] {
        if stale.exists() {
            fs::remove_file(stale).map_err(|e| Error::io(stale, e))?;
        }
    }
    write_json_file(&dir.join(CONFIG_FILE), config)?;

    let mut metrics_out = create(&partial_path)?;
    let timing_path = dir.join(TIMING_FILE);
    let mut timing_out = create(&timing_path)?;

    let (train_set, test_set) = prepare_data(config)?;
    if config.output.label_audit {
        train_set.write_label_audit(create(&dir.join(AUDIT_FILE))?)?;
    }
    let engine = Engine::new(config.clone(), train_set, test_set)?;
    let statistic = engine.statistic();

    let report = train_engine(engine, |engine, m, t| {
        write_json_line(&mut metrics_out, &partial_path, m)?;
        write_json_line(&mut timing_out, &timing_path, t)?;
        if config.output.snapshot_epochs.contains(&m.epoch) {
            let path = dir.join(format!("hist_epoch_{}.csv", m.epoch));
            engine.snapshot(statistic)?.write_csv(create(&path)?)?;
        }
        on_epoch(m);
        Ok(())
    })?;
    drop(metrics_out);
    fs::rename(&partial_path, &metrics_path).map_err(|e| Error::io(&metrics_path, e))?;

    if config.output.checkpoint {
        save_checkpoint(report.engine.network(), dir, CHECKPOINT_STEM)?;
    }
    write_json_file(&dir.join(SUMMARY_FILE), &report.summary)?;
    Ok(report.summary)
}

fn read_json_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| {
            Error::Format(format!("{} line {}: {e}", path.display(), i + 1))
        })?);
    }
    Ok(out)
}

/// Rebuilds a [`RunSummary`] from a run directory or its `metrics.jsonl`.
///
/// Incomplete runs are rejected: a `.partial` metrics file, epochs that are
/// not numbered 1..n, or fewer epochs than the saved config asks for. The
/// mode, true noise rate and wall time are filled in from the sibling
/// `config.json` and `timing.jsonl` when present.
pub fn summarize(path: &Path) -> Result<RunSummary> {
    let metrics_path = if path.is_dir() {
        path.join(METRICS_FILE)
    } else {
        path.to_path_buf()
    };
    if metrics_path.to_string_lossy().ends_with(PARTIAL_SUFFIX) || partial(&metrics_path).exists() && !metrics_path.exists() {
        return Err(state(format!(
            "{} belongs to an incomplete run",
            metrics_path.display()
        )));
    }
    let records: Vec<EpochMetrics> = read_json_lines(&metrics_path)?;
    if records.is_empty() {
        return Err(state(format!("{} holds no epochs", metrics_path.display())));
    }
    if let Some((i, m)) = records.iter().enumerate().find(|(i, m)| m.epoch != i + 1) {
        return Err(state(format!(
            "{}: line {} is epoch {}, expected {}",
            metrics_path.display(),
            i + 1,
            m.epoch,
            i + 1
        )));
    }
    let mut summary = summarize_records(&records)?;

    let dir = metrics_path.parent().unwrap_or(Path::new("."));
    let config_path = dir.join(CONFIG_FILE);
    if config_path.exists() {
        let text = fs::read_to_string(&config_path).map_err(|e| Error::io(&config_path, e))?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", config_path.display())))?;
        if records.len() != config.train.epochs {
            return Err(state(format!(
                "{} has {} of {} epochs",
                metrics_path.display(),
                records.len(),
                config.train.epochs
            )));
        }
        summary.mode = Some(config.mode);
        summary.true_noise_rate = Some(config.noise.rate);
    }
    let saved_path = dir.join(SUMMARY_FILE);
    if saved_path.exists() {
        if let Ok(saved) = read_summary(&saved_path) {
            summary.tau_source = saved.tau_source;
            summary.estimated_at_epoch = saved.estimated_at_epoch;
        }
    }
    let timing_path = dir.join(TIMING_FILE);
    if timing_path.exists() {
        let timings: Vec<EpochTiming> = read_json_lines(&timing_path)?;
        if timings.len() == records.len() {
            summary.total_wall_time_seconds = total_time(&timings);
        }
    }
    Ok(summary)
}

/// Reads a `summary.json`, or the one inside a run directory.
pub fn read_summary(path: &Path) -> Result<RunSummary> {
    let path = if path.is_dir() {
        path.join(SUMMARY_FILE)
    } else {
        path.to_path_buf()
    };
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Text,
    Csv,
}

const COMPARE_HEADER: [&str; 5] = ["mode", "avg_test_acc_last10", "tau_est", "tau_est_error", "wall_time_s"];

/// One row per summary, in the order given.
pub fn compare(summaries: &[RunSummary], format: TableFormat) -> Result<String> {
    if summaries.is_empty() {
        return Err(argument("compare needs at least one summary"));
    }
    let cell = |v: Option<f64>, digits: usize| v.map_or_else(|| "-".to_string(), |v| format!("{v:.digits$}"));
    let rows: Vec<[String; 5]> = summaries
        .iter()
        .map(|s| {
            [
                s.mode.map_or_else(|| "-".to_string(), |m| m.to_string()),
                format!("{:.4}", s.avg_test_acc_last10),
                cell(s.final_tau_est, 4),
                cell(s.tau_error(), 4),
                cell(s.total_wall_time_seconds, 1),
            ]
        })
        .collect();

    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            out.push_str(&COMPARE_HEADER.join(","));
            out.push('\n');
            for row in &rows {
                out.push_str(&row.join(","));
                out.push('\n');
            }
        }
        TableFormat::Text => {
            let mut widths = COMPARE_HEADER.map(str::len);
            for row in &rows {
                for (w, c) in widths.iter_mut().zip(row) {
                    *w = (*w).max(c.len());
                }
            }
            let mut line = |cells: &[&str]| {
                let padded: Vec<String> = cells
                    .iter()
                    .zip(widths)
                    .enumerate()
                    .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                    .collect();
                out.push_str(padded.join("  ").trim_end());
                out.push('\n');
            };
            line(&COMPARE_HEADER);
            for row in &rows {
                line(&row.iter().map(String::as_str).collect::<Vec<_>>());
            }
        }
    }
    Ok(out)
}
