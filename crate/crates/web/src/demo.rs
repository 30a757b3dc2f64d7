//! Plain-Rust side of the demo; everything here also runs natively.

use serde::Serialize;
use serde_json::{json, Value};

use pdiff_core::runner::config::{apply_overrides, FlatConfig};
use pdiff_core::runner::{curve_from_histogram, prepare_data, probe_histograms, Engine, EpochMetrics, RunConfig};
use pdiff_core::selector::{bin_of, threshold_with_tau, weights, zeta, DiffWindow, Statistic};

/// Small enough to train in a browser tab in well under a second per epoch.
pub const DEFAULTS: &[(&str, &str)] = &[
    ("mode", "pdiff"),
    ("seed", "0"),
    ("dataset.source", "blobs"),
    ("dataset.blobs.num_classes", "10"),
    ("dataset.blobs.dim", "20"),
    ("dataset.blobs.samples_per_class", "300"),
    ("dataset.blobs.cluster_std", "0.5"),
    ("noise.kind", "symmetry"),
    ("noise.rate", "0.4"),
    ("model.hidden", "[64]"),
    ("train.epochs", "30"),
    ("train.batch_size", "64"),
    ("train.lr", "0.05"),
    ("selector.T_k", "10"),
    ("selector.tau", "0.4"),
];

fn raw_value(v: &Value) -> Result<String, String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(_) | Value::Bool(_) | Value::Array(_) => Ok(v.to_string()),
        Value::Null => Err("null is not a config value".into()),
        Value::Object(_) => Err("nested objects are not config values; use dotted keys".into()),
    }
}

/// `settings_json` is an object of dotted config keys, applied over
/// [`DEFAULTS`]. A `null` value removes the key (e.g. `"selector.tau": null`
/// for the estimating mode).
pub fn build_config(settings_json: &str) -> Result<RunConfig, String> {
    let settings: Value = if settings_json.trim().is_empty() {
        json!({})
    } else {
        serde_json::from_str(settings_json).map_err(|e| format!("settings: {e}"))?
    };
    let Value::Object(map) = settings else {
        return Err("settings must be a JSON object".into());
    };
    let mut flat = FlatConfig::new();
    let defaults: Vec<(String, String)> = DEFAULTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    apply_overrides(&mut flat, &defaults);
    let mut overrides = Vec::new();
    for (key, value) in &map {
        if value.is_null() {
            flat.remove(key);
        } else {
            overrides.push((key.clone(), raw_value(value)?));
        }
    }
    apply_overrides(&mut flat, &overrides);
    RunConfig::from_flat(flat).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
pub struct HistogramView {
    pub statistic: String,
    pub bins: usize,
    pub clean: Vec<u64>,
    pub noise: Vec<u64>,
}

#[derive(Debug, Serialize)]
pub struct EpochView {
    pub metrics: EpochMetrics,
    pub histogram: HistogramView,
    pub done: bool,
}

/// A training run advanced one epoch per call.
pub struct Session {
    engine: Engine,
}

impl Session {
    pub fn new(settings_json: &str) -> Result<Self, String> {
        let config = build_config(settings_json)?;
        let (train, test) = prepare_data(&config).map_err(|e| e.to_string())?;
        let engine = Engine::new(config, train, test).map_err(|e| e.to_string())?;
        Ok(Session { engine })
    }

    pub fn epoch(&self) -> usize {
        self.engine.epoch()
    }

    pub fn total_epochs(&self) -> usize {
        self.engine.config().train.epochs
    }

    pub fn is_finished(&self) -> bool {
        self.engine.is_finished()
    }

    pub fn histogram(&self) -> Result<HistogramView, String> {
        let statistic = self.engine.statistic();
        let hist = self.engine.snapshot(statistic).map_err(|e| e.to_string())?;
        Ok(HistogramView {
            statistic: statistic.to_string(),
            bins: hist.bins,
            clean: hist.clean,
            noise: hist.noise,
        })
    }

    pub fn step(&mut self) -> Result<EpochView, String> {
        let (metrics, _) = self.engine.run_epoch().map_err(|e| e.to_string())?;
        Ok(EpochView {
            metrics,
            histogram: self.histogram()?,
            done: self.engine.is_finished(),
        })
    }
}

/// Drop-rate curves for both statistics at `probe_epoch`, as JSON
/// `{"delta": [...], "py": [...]}`.
pub fn drop_curves(settings_json: &str, probe_epoch: usize) -> Result<String, String> {
    let config = build_config(settings_json)?;
    let stats = [Statistic::ProbDiff, Statistic::TrueClassProb];
    let hists = probe_histograms(&config, probe_epoch, &stats).map_err(|e| e.to_string())?;
    let mut out = serde_json::Map::new();
    for (s, h) in stats.iter().zip(&hists) {
        let points = curve_from_histogram(h).map_err(|e| e.to_string())?;
        out.insert(s.to_string(), serde_json::to_value(points).expect("serializable"));
    }
    Ok(Value::Object(out).to_string())
}

#[derive(Debug, Serialize)]
pub struct Selection {
    /// `null` when everything is kept because the window is empty.
    pub threshold: Option<f64>,
    pub keep: Vec<bool>,
    pub bins_of_values: Vec<usize>,
    pub bin_counts: Vec<u64>,
    pub zeta: Option<f64>,
    pub kept_fraction: f64,
}

fn parse_values(text: &str) -> Result<Vec<f64>, String> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("'{t}' is not a number")))
        .collect()
}

/// The selection rule applied to a hand-entered window of statistics.
pub fn select(values_text: &str, rate: f64, bins: usize) -> Result<Selection, String> {
    let values = parse_values(values_text)?;
    let mut window = DiffWindow::new(values.len().max(1), bins).map_err(|e| e.to_string())?;
    window.push(&values).map_err(|e| e.to_string())?;
    let threshold = threshold_with_tau(&window, rate).map_err(|e| e.to_string())?;
    let keep: Vec<bool> = weights(&values, threshold).iter().map(|w| w.is_kept()).collect();
    let kept = keep.iter().filter(|&&k| k).count();
    Ok(Selection {
        threshold: threshold.value(),
        bins_of_values: values
            .iter()
            .map(|&v| bin_of(v, bins))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?,
        keep,
        bin_counts: window.bin_counts().to_vec(),
        zeta: if window.is_empty() { None } else { zeta(&window).ok() },
        kept_fraction: if values.is_empty() { 1.0 } else { kept as f64 / values.len() as f64 },
    })
}
