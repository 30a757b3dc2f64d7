//! Flat run configuration.
//!
//! The file is TOML whose keys are read as dotted paths, so `train.lr = 0.01`
//! and `[train]\nlr = 0.01` are the same key. Every key can be overridden on
//! the command line as `--train.lr 0.01`. Defaults follow the reference
//! experiment protocol.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use toml::Value;

use crate::data::BlobSpec;
use crate::error::{Error, Result};
use crate::nn::{Activation, GradReduction};
use crate::noise::{NoiseKind, NoiseSpec};

/// Every key the config understands, with its default (`-` means required
/// or absent).
pub const KEYS: &[(&str, &str)] = &[
    ("mode", "-"),
    ("seed", "0"),
    ("output_dir", "\"out\""),
    ("dataset.source", "-"),
    ("dataset.images", "- (idx)"),
    ("dataset.labels", "- (idx)"),
    ("dataset.path", "- (csv)"),
    ("dataset.label_column", "\"label\" (csv)"),
    ("dataset.blobs.num_classes", "10 (blobs)"),
    ("dataset.blobs.dim", "20 (blobs)"),
    ("dataset.blobs.samples_per_class", "500 (blobs)"),
    ("dataset.blobs.center_spread", "1.0 (blobs)"),
    ("dataset.blobs.cluster_std", "0.5 (blobs)"),
    ("dataset.limit", "- (use every sample)"),
    ("dataset.test_fraction", "0.2"),
    ("noise.kind", "\"symmetry\""),
    ("noise.rate", "0.0"),
    ("model.hidden", "[256]"),
    ("model.activation", "\"relu\""),
    ("train.epochs", "200"),
    ("train.batch_size", "128"),
    ("train.lr", "0.001"),
    ("train.momentum", "0.9"),
    ("train.grad_reduction", "\"mean\""),
    ("selector.H", "200"),
    ("selector.M", "0.2"),
    ("selector.T_k", "20"),
    ("selector.tau", "- (required for pdiff, pdiff_py_variant)"),
    ("selector.zeta_threshold", "0.9"),
    ("output.snapshot_epochs", "[]"),
    ("output.checkpoint", "true"),
    ("output.label_audit", "true"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Histogram selection with a known noise rate.
    Pdiff,
    /// Histogram selection with the noise rate estimated during training.
    PdiffNoTau,
    /// Like `pdiff`, but histogramming the observed-label probability.
    PdiffPyVariant,
    /// Every sample is trained on.
    Normal,
    /// Only ground-truth-clean samples are trained on (upper bound).
    CleanOracle,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::Pdiff,
        Mode::PdiffNoTau,
        Mode::PdiffPyVariant,
        Mode::Normal,
        Mode::CleanOracle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Pdiff => "pdiff",
            Mode::PdiffNoTau => "pdiff_no_tau",
            Mode::PdiffPyVariant => "pdiff_py_variant",
            Mode::Normal => "normal",
            Mode::CleanOracle => "clean_oracle",
        }
    }

    pub fn uses_selector(self) -> bool {
        matches!(self, Mode::Pdiff | Mode::PdiffNoTau | Mode::PdiffPyVariant)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Mode::ALL.iter().map(|m| m.as_str()).collect();
                Error::Config(format!("unknown mode '{s}' (expected one of {})", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetSource {
    Idx { images: PathBuf, labels: PathBuf },
    Csv { path: PathBuf, label_column: String },
    Blobs(BlobSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    #[serde(flatten)]
    pub source: DatasetSource,
    /// Keep only the first `limit` samples.
    pub limit: Option<usize>,
    pub test_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub grad_reduction: GradReduction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorParams {
    pub bins: usize,
    pub window_fraction: f64,
    pub ramp_epochs: usize,
    pub tau: Option<f64>,
    pub zeta_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub snapshot_epochs: Vec<usize>,
    pub checkpoint: bool,
    pub label_audit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub dataset: DatasetConfig,
    pub noise: NoiseSpec,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub selector: SelectorParams,
    pub output: OutputConfig,
}

/// Dotted key to raw value.
pub type FlatConfig = BTreeMap<String, Value>;

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Flattens a TOML document into dotted keys.
pub fn parse_flat(text: &str) -> Result<FlatConfig> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| config_err(format!("invalid config syntax: {e}")))?;
    let mut flat = FlatConfig::new();
    flatten_into(&mut flat, "", table);
    Ok(flat)
}

fn flatten_into(flat: &mut FlatConfig, prefix: &str, table: toml::Table) {
    for (key, value) in table {
        let path = if prefix.is_empty() {
            key
        } else {
            format!("{prefix}.{key}")
        };
        match value {
            Value::Table(inner) => flatten_into(flat, &path, inner),
            other => {
                flat.insert(path, other);
            }
        }
    }
}

pub fn read_flat(path: &Path) -> Result<FlatConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_flat(&text).map_err(|e| e.with_context(format!("config {}", path.display())))
}

/// Interprets a command-line value: anything that parses as a TOML value
/// (number, boolean, quoted string, array) is taken as such, everything else
/// is a bare string.
pub fn parse_override_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Applies `(key, raw value)` pairs on top of `flat`.
pub fn apply_overrides(flat: &mut FlatConfig, overrides: &[(String, String)]) {
    for (key, raw) in overrides {
        flat.insert(key.clone(), parse_override_value(raw));
    }
}

struct Reader {
    flat: FlatConfig,
}

impl Reader {
    fn take(&mut self, key: &str) -> Option<Value> {
        self.flat.remove(key)
    }

    fn type_err(key: &str, expected: &str, got: &Value) -> Error {
        config_err(format!("'{key}' must be {expected}, got {got}"))
    }

    fn string(&mut self, key: &str) -> Result<Option<String>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(v) => Err(Self::type_err(key, "a string", &v)),
        }
    }

    fn required_string(&mut self, key: &str) -> Result<String> {
        self.string(key)?
            .ok_or_else(|| config_err(format!("missing required key '{key}'")))
    }

    fn parsed<T: FromStr<Err = Error>>(&mut self, key: &str, default: T) -> Result<T> {
        match self.string(key)? {
            None => Ok(default),
            Some(s) => s
                .parse()
                .map_err(|e: Error| config_err(format!("'{key}': {}", e.root()))),
        }
    }

    fn float(&mut self, key: &str) -> Result<Option<f64>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Float(f)) => Ok(Some(f)),
            Some(Value::Integer(i)) => Ok(Some(i as f64)),
            Some(v) => Err(Self::type_err(key, "a number", &v)),
        }
    }

    fn float_or(&mut self, key: &str, default: f64) -> Result<f64> {
        Ok(self.float(key)?.unwrap_or(default))
    }

    fn uint(&mut self, key: &str) -> Result<Option<u64>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if i >= 0 => Ok(Some(i as u64)),
            Some(v) => Err(Self::type_err(key, "a non-negative integer", &v)),
        }
    }

    fn usize_or(&mut self, key: &str, default: usize) -> Result<usize> {
        Ok(self.uint(key)?.map_or(default, |v| v as usize))
    }

    fn bool_or(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.take(key) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(b),
            Some(v) => Err(Self::type_err(key, "true or false", &v)),
        }
    }

    /// A list of non-negative integers, given as an array, a single integer
    /// or a comma-separated string (handy on the command line).
    fn usize_list_or(&mut self, key: &str, default: Vec<usize>) -> Result<Vec<usize>> {
        let bad = |v: &Value| Self::type_err(key, "a list of non-negative integers", v);
        match self.take(key) {
            None => Ok(default),
            Some(Value::Integer(i)) if i >= 0 => Ok(vec![i as usize]),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::Integer(i) if *i >= 0 => Ok(*i as usize),
                    other => Err(bad(other)),
                })
                .collect(),
            Some(Value::String(s)) if s.trim().is_empty() => Ok(Vec::new()),
            Some(Value::String(s)) => s
                .split(',')
                .map(|part| {
                    part.trim()
                        .parse::<usize>()
                        .map_err(|_| bad(&Value::String(s.clone())))
                })
                .collect(),
            Some(v) => Err(bad(&v)),
        }
    }

    fn finish(self) -> Result<()> {
        if self.flat.is_empty() {
            return Ok(());
        }
        let keys: Vec<&str> = self.flat.keys().map(String::as_str).collect();
        Err(config_err(format!("unknown key(s): {}", keys.join(", "))))
    }
}

impl RunConfig {
    /// Builds a validated config; every key in `flat` must be consumed.
    pub fn from_flat(flat: FlatConfig) -> Result<Self> {
        let mut r = Reader { flat };

        let mode: Mode = r.required_string("mode")?.parse()?;
        let seed = r.uint("seed")?.unwrap_or(0);
        let output_dir = PathBuf::from(r.string("output_dir")?.unwrap_or_else(|| "out".into()));

        let source_name = r.required_string("dataset.source")?;
        let source = match source_name.as_str() {
            "idx" => DatasetSource::Idx {
                images: r.required_string("dataset.images")?.into(),
                labels: r.required_string("dataset.labels")?.into(),
            },
            "csv" => DatasetSource::Csv {
                path: r.required_string("dataset.path")?.into(),
                label_column: r.string("dataset.label_column")?.unwrap_or_else(|| "label".into()),
            },
            "blobs" => DatasetSource::Blobs(BlobSpec {
                num_classes: r.usize_or("dataset.blobs.num_classes", 10)?,
                dim: r.usize_or("dataset.blobs.dim", 20)?,
                samples_per_class: r.usize_or("dataset.blobs.samples_per_class", 500)?,
                center_spread: r.float_or("dataset.blobs.center_spread", 1.0)?,
                cluster_std: r.float_or("dataset.blobs.cluster_std", 0.5)?,
            }),
            other => {
                return Err(config_err(format!(
                    "'dataset.source' must be idx, csv or blobs, got '{other}'"
                )))
            }
        };
        let dataset = DatasetConfig {
            source,
            limit: r.uint("dataset.limit")?.map(|v| v as usize),
            test_fraction: r.float_or("dataset.test_fraction", 0.2)?,
        };

        let noise = NoiseSpec {
            kind: r.parsed("noise.kind", NoiseKind::Symmetry)?,
            rate: r.float_or("noise.rate", 0.0)?,
        };
        let model = ModelConfig {
            hidden: r.usize_list_or("model.hidden", vec![256])?,
            activation: r.parsed("model.activation", Activation::default())?,
        };
        let train = TrainConfig {
            epochs: r.usize_or("train.epochs", 200)?,
            batch_size: r.usize_or("train.batch_size", 128)?,
            lr: r.float_or("train.lr", 0.001)?,
            momentum: r.float_or("train.momentum", 0.9)?,
            grad_reduction: r.parsed("train.grad_reduction", GradReduction::default())?,
        };
        let selector = SelectorParams {
            bins: r.usize_or("selector.H", 200)?,
            window_fraction: r.float_or("selector.M", 0.2)?,
            ramp_epochs: r.usize_or("selector.T_k", 20)?,
            tau: r.float("selector.tau")?,
            zeta_threshold: r.float_or("selector.zeta_threshold", 0.9)?,
        };
        let output = OutputConfig {
            snapshot_epochs: r.usize_list_or("output.snapshot_epochs", Vec::new())?,
            checkpoint: r.bool_or("output.checkpoint", true)?,
            label_audit: r.bool_or("output.label_audit", true)?,
        };
        r.finish()?;

        let config = RunConfig {
            mode,
            seed,
            output_dir,
            dataset,
            noise,
            model,
            train,
            selector,
            output,
        };
        config.validate()?;
        Ok(config)
    }

    /// Reads `path` (if given) and applies `overrides` on top.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut flat = match path {
            Some(p) => read_flat(p)?,
            None => FlatConfig::new(),
        };
        apply_overrides(&mut flat, overrides);
        Self::from_flat(flat)
    }

    pub fn validate(&self) -> Result<()> {
        let needs_tau = matches!(self.mode, Mode::Pdiff | Mode::PdiffPyVariant);
        match self.selector.tau {
            None if needs_tau => {
                return Err(config_err(format!(
                    "mode {} requires 'selector.tau'",
                    self.mode
                )))
            }
            Some(_) if self.mode == Mode::PdiffNoTau => {
                return Err(config_err(
                    "mode pdiff_no_tau estimates the noise rate; remove 'selector.tau'",
                ))
            }
            Some(t) if !(0.0..1.0).contains(&t) => {
                return Err(config_err(format!("'selector.tau' must lie in [0, 1), got {t}")))
            }
            _ => {}
        }
        if !(0.0..1.0).contains(&self.noise.rate) {
            return Err(config_err(format!("'noise.rate' must lie in [0, 1), got {}", self.noise.rate)));
        }
        if !(self.dataset.test_fraction > 0.0 && self.dataset.test_fraction < 1.0) {
            return Err(config_err("'dataset.test_fraction' must lie in (0, 1)"));
        }
        if self.dataset.limit == Some(0) {
            return Err(config_err("'dataset.limit' must be positive"));
        }
        if self.model.hidden.contains(&0) {
            return Err(config_err("'model.hidden' layer widths must be positive"));
        }
        let t = &self.train;
        if t.epochs == 0 || t.batch_size == 0 {
            return Err(config_err("'train.epochs' and 'train.batch_size' must be positive"));
        }
        if !(t.lr > 0.0 && t.lr.is_finite()) {
            return Err(config_err("'train.lr' must be positive"));
        }
        if !(0.0..1.0).contains(&t.momentum) {
            return Err(config_err("'train.momentum' must lie in [0, 1)"));
        }
        let s = &self.selector;
        if s.bins < 2 || !s.bins.is_multiple_of(2) {
            return Err(config_err("'selector.H' must be an even number >= 2"));
        }
        if !(0.0..=1.0).contains(&s.window_fraction) {
            return Err(config_err("'selector.M' must lie in [0, 1]"));
        }
        if s.ramp_epochs == 0 {
            return Err(config_err("'selector.T_k' must be positive"));
        }
        if !(s.zeta_threshold > 0.0 && s.zeta_threshold <= 1.0) {
            return Err(config_err("'selector.zeta_threshold' must lie in (0, 1]"));
        }
        if let Some(&e) = self.output.snapshot_epochs.iter().find(|&&e| e == 0 || e > t.epochs) {
            return Err(config_err(format!(
                "snapshot epoch {e} outside 1..={}",
                t.epochs
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> FlatConfig {
        parse_flat("mode = \"normal\"\ndataset.source = \"blobs\"\n").unwrap()
    }

    #[test]
    fn minimal_config_gets_protocol_defaults() {
        let c = RunConfig::from_flat(minimal()).unwrap();
        assert_eq!(c.selector.bins, 200);
        assert_eq!(c.selector.window_fraction, 0.2);
        assert_eq!(c.selector.ramp_epochs, 20);
        assert_eq!(c.selector.zeta_threshold, 0.9);
        assert_eq!(c.train.lr, 0.001);
        assert_eq!(c.train.batch_size, 128);
        assert_eq!(c.train.epochs, 200);
        assert_eq!(c.train.momentum, 0.9);
        assert_eq!(c.train.grad_reduction, GradReduction::Mean);
        assert_eq!(c.model.hidden, vec![256]);
        assert_eq!(c.noise, NoiseSpec::clean());
    }

    #[test]
    fn every_documented_key_is_accepted() {
        let text = r#"
            mode = "pdiff"
            seed = 3
            output_dir = "x"
            dataset.source = "blobs"
            dataset.blobs.num_classes = 3
            dataset.blobs.dim = 2
            dataset.blobs.samples_per_class = 10
            dataset.blobs.center_spread = 1
            dataset.blobs.cluster_std = 0.1
            dataset.limit = 20
            dataset.test_fraction = 0.5
            noise.kind = "pair"
            noise.rate = 0.45
            model.hidden = [8, 4]
            model.activation = "tanh"
            [train]
            epochs = 4
            batch_size = 2
            lr = 0.1
            momentum = 0.5
            grad_reduction = "sum"
            [selector]
            H = 8
            M = 0.5
            T_k = 2
            tau = 0.45
            zeta_threshold = 0.8
            [output]
            snapshot_epochs = [1, 4]
            checkpoint = false
            label_audit = false
        "#;
        let c = RunConfig::from_flat(parse_flat(text).unwrap()).unwrap();
        assert_eq!(c.model.hidden, vec![8, 4]);
        assert_eq!(c.selector.tau, Some(0.45));
        assert_eq!(c.train.grad_reduction, GradReduction::Sum);
        assert_eq!(c.output.snapshot_epochs, vec![1, 4]);
        let documented: Vec<&str> = KEYS.iter().map(|(k, _)| *k).collect();
        for key in parse_flat(text).unwrap().keys() {
            assert!(documented.contains(&key.as_str()), "{key} undocumented");
        }
    }

    #[test]
    fn pdiff_without_tau_is_rejected() {
        let mut flat = minimal();
        apply_overrides(&mut flat, &[("mode".into(), "pdiff".into())]);
        let err = RunConfig::from_flat(flat).unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("selector.tau")), "{err}");
    }

    #[test]
    fn unknown_key_is_named() {
        let mut flat = minimal();
        apply_overrides(&mut flat, &[("pdfif.H".into(), "200".into())]);
        let err = RunConfig::from_flat(flat).unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("pdfif.H")), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn keys_of_another_source_are_rejected() {
        let mut flat = minimal();
        apply_overrides(&mut flat, &[("dataset.path".into(), "a.csv".into())]);
        assert!(RunConfig::from_flat(flat).is_err());
    }

    #[test]
    fn missing_required_fields() {
        assert!(RunConfig::from_flat(parse_flat("mode = \"normal\"").unwrap()).is_err());
        assert!(RunConfig::from_flat(parse_flat("dataset.source = \"blobs\"").unwrap()).is_err());
        let idx = parse_flat("mode = \"normal\"\ndataset.source = \"idx\"\ndataset.images = \"a\"").unwrap();
        assert!(RunConfig::from_flat(idx).is_err());
    }

    #[test]
    fn overrides_win_and_parse_like_toml() {
        let mut flat = parse_flat("mode = \"normal\"\ndataset.source = \"blobs\"\ntrain.lr = 0.5").unwrap();
        apply_overrides(
            &mut flat,
            &[
                ("train.lr".into(), "0.25".into()),
                ("model.hidden".into(), "32,16".into()),
                ("output.snapshot_epochs".into(), "[1, 2]".into()),
                ("noise.kind".into(), "pair".into()),
                ("train.epochs".into(), "5".into()),
            ],
        );
        let c = RunConfig::from_flat(flat).unwrap();
        assert_eq!(c.train.lr, 0.25);
        assert_eq!(c.model.hidden, vec![32, 16]);
        assert_eq!(c.output.snapshot_epochs, vec![1, 2]);
        assert_eq!(c.noise.kind, NoiseKind::Pair);
    }

    #[test]
    fn type_and_range_errors() {
        for (key, value) in [
            ("train.lr", "\"fast\""),
            ("train.epochs", "-1"),
            ("train.momentum", "1.0"),
            ("selector.H", "7"),
            ("noise.rate", "1.0"),
            ("output.snapshot_epochs", "500"),
            ("mode", "bogus"),
            ("model.activation", "sigmoid"),
        ] {
            let mut flat = minimal();
            apply_overrides(&mut flat, &[(key.into(), value.into())]);
            let err = RunConfig::from_flat(flat).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{key}={value}: {err}");
        }
    }

    #[test]
    fn tau_is_rejected_for_the_estimating_mode() {
        let mut flat = minimal();
        apply_overrides(
            &mut flat,
            &[("mode".into(), "pdiff_no_tau".into()), ("selector.tau".into(), "0.4".into())],
        );
        assert!(RunConfig::from_flat(flat).is_err());
    }
}
