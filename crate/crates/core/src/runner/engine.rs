use serde::{Deserialize, Serialize};

use super::clock::Stopwatch;
use super::config::{DatasetSource, Mode, RunConfig};
use crate::data::{batches, gen_blobs, load_csv, load_idx, split, LabeledDataset};
use crate::error::{state, Result};
use crate::nn::{
    backward, evaluate, forward, init_network, predict_probs, sgd_momentum_step, softmax_rows,
    weighted_ce_loss, Network, OptimizerState, SampleWeight,
};
use crate::noise::{corrupt, score_rows};
use crate::selector::{weights, LabeledHistogram, Selector, SelectorConfig, SelectorState, Statistic, Threshold};

/// One line of `metrics.jsonl`.
///
/// Wall time is kept out of this record (see [`EpochTiming`]) so that two
/// runs of the same config produce identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean cross-entropy over the samples that were trained on.
    pub train_loss_selected: f64,
    /// Accuracy on the held-out split, against true labels.
    pub test_accuracy: f64,
    /// Threshold used for the epoch's last mini-batch (`null`: select all).
    pub delta_hat: Option<f64>,
    #[serde(rename = "R")]
    pub r: Option<f64>,
    pub zeta: Option<f64>,
    pub tau_est: Option<f64>,
    pub selected_fraction: f64,
    /// Share of the epoch's dropped samples that are truly noisy.
    pub drop_precision: f64,
    /// Share of the truly noisy training samples dropped this epoch.
    pub drop_recall: f64,
}

/// One line of `timing.jsonl`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochTiming {
    pub epoch: usize,
    /// Whole epoch: training pass plus test evaluation.
    pub wall_time_seconds: Option<f64>,
    /// Training pass only.
    pub train_seconds: Option<f64>,
}

/// Loads the configured dataset, splits off the test part and corrupts the
/// training labels.
pub fn prepare_data(config: &RunConfig) -> Result<(LabeledDataset, LabeledDataset)> {
    let full = match &config.dataset.source {
        DatasetSource::Idx { images, labels } => load_idx(images, labels)?,
        DatasetSource::Csv { path, label_column } => load_csv(path, label_column)?,
        DatasetSource::Blobs(spec) => gen_blobs(spec, config.seed)?,
    };
    let full = match config.dataset.limit {
        Some(n) if n < full.len() => full.truncate(n)?,
        _ => full,
    };
    let (train, test) = split(&full, config.dataset.test_fraction, config.seed)?;
    let train = corrupt(&train, &config.noise, config.seed)?;
    Ok((train, test))
}

/// Training state for one run; advance it one epoch at a time.
#[derive(Debug, Clone)]
pub struct Engine {
    config: RunConfig,
    train: LabeledDataset,
    test: LabeledDataset,
    net: Network,
    optimizer: OptimizerState,
    selector: Option<Selector>,
    statistic: Statistic,
    epoch: usize,
}

impl Engine {
    pub fn new(config: RunConfig, train: LabeledDataset, test: LabeledDataset) -> Result<Self> {
        config.validate()?;
        if train.dim() != test.dim() {
            return Err(state("train and test features differ in width"));
        }
        let mut dims = vec![train.dim()];
        dims.extend(&config.model.hidden);
        dims.push(train.num_classes());
        let net = init_network(&dims, config.model.activation, config.seed)?;
        let optimizer = OptimizerState::new(&net, config.train.lr, config.train.momentum)?;

        let iters_per_epoch = train.len() / config.train.batch_size;
        if iters_per_epoch == 0 {
            return Err(crate::error::argument(format!(
                "batch size {} exceeds the {} training samples",
                config.train.batch_size,
                train.len()
            )));
        }
        let selector = if config.mode.uses_selector() {
            let s = &config.selector;
            Some(Selector::new(SelectorConfig {
                bins: s.bins,
                window_fraction: s.window_fraction,
                ramp_epochs: s.ramp_epochs,
                tau: s.tau,
                zeta_threshold: s.zeta_threshold,
                batch_size: config.train.batch_size,
                iters_per_epoch,
            })?)
        } else {
            None
        };
        let statistic = match config.mode {
            Mode::PdiffPyVariant => Statistic::TrueClassProb,
            _ => Statistic::ProbDiff,
        };
        Ok(Engine {
            config,
            train,
            test,
            net,
            optimizer,
            selector,
            statistic,
            epoch: 0,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn train_set(&self) -> &LabeledDataset {
        &self.train
    }

    pub fn test_set(&self) -> &LabeledDataset {
        &self.test
    }

    /// Epochs completed so far.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn statistic(&self) -> Statistic {
        self.statistic
    }

    pub fn selector_state(&self) -> Option<&SelectorState> {
        self.selector.as_ref().map(Selector::state)
    }

    pub fn is_finished(&self) -> bool {
        self.epoch >= self.config.train.epochs
    }

    /// Runs the next epoch. After the final epoch the selector's end-of-run
    /// fallback estimate (if any) is already reflected in the metrics.
    pub fn run_epoch(&mut self) -> Result<(EpochMetrics, EpochTiming)> {
        if self.is_finished() {
            return Err(state(format!(
                "all {} epochs have already run",
                self.config.train.epochs
            )));
        }
        let epoch = self.epoch + 1;
        let whole = Stopwatch::start();
        if let Some(sel) = self.selector.as_mut() {
            sel.begin_epoch(epoch)?;
        }

        let reduction = self.config.train.grad_reduction;
        let (mut processed, mut kept, mut loss_sum) = (0usize, 0usize, 0.0f64);
        let mut dropped_rows = Vec::new();
        let mut last_threshold = Threshold::SelectAll;
        let mut scores = Vec::with_capacity(self.config.train.batch_size);

        for batch in batches(&self.train, self.config.train.batch_size, self.config.seed, epoch)? {
            let (logits, cache) = forward(&self.net, &batch)?;
            let probs = softmax_rows(&logits)?;
            let omegas: Vec<SampleWeight> = match (self.config.mode, self.selector.as_ref()) {
                (Mode::Normal, _) => vec![SampleWeight::Keep; batch.len()],
                (Mode::CleanOracle, _) => batch
                    .rows
                    .iter()
                    .map(|&r| if self.train.is_noisy(r) { SampleWeight::Drop } else { SampleWeight::Keep })
                    .collect(),
                (_, Some(sel)) => {
                    scores.clear();
                    for (row, &y) in probs.rows().into_iter().zip(&batch.observed_labels) {
                        scores.push(self.statistic.score(row.as_slice().expect("contiguous"), y)?);
                    }
                    last_threshold = sel.threshold();
                    weights(&scores, last_threshold)
                }
                (_, None) => unreachable!("selector modes always build a selector"),
            };

            for (s, (&y, &w)) in batch.observed_labels.iter().zip(&omegas).enumerate() {
                if w.is_kept() {
                    loss_sum += weighted_ce_loss(probs.row(s).as_slice().expect("contiguous"), y, w)?;
                    kept += 1;
                } else {
                    dropped_rows.push(batch.rows[s]);
                }
            }
            processed += batch.len();

            let grads = backward(&self.net, &cache, &probs, &batch.observed_labels, &omegas, reduction)?;
            sgd_momentum_step(&mut self.net, &grads, &mut self.optimizer)?;
            if let Some(sel) = self.selector.as_mut() {
                sel.observe(&scores)?;
            }
        }
        let train_seconds = whole.seconds();

        if epoch == self.config.train.epochs {
            if let Some(sel) = self.selector.as_mut() {
                sel.finish()?;
            }
        }
        let test_accuracy = evaluate(&self.net, &self.test)?;
        let drop = score_rows(&self.train, dropped_rows.into_iter());
        let sel_state = self.selector.as_ref().map(Selector::state);
        let metrics = EpochMetrics {
            epoch,
            train_loss_selected: if kept == 0 { 0.0 } else { loss_sum / kept as f64 },
            test_accuracy,
            delta_hat: last_threshold.value(),
            r: sel_state.and_then(|s| s.current_r),
            zeta: sel_state.and_then(|s| s.zeta),
            tau_est: sel_state.and_then(|s| s.tau_est),
            selected_fraction: kept as f64 / processed as f64,
            drop_precision: drop.precision,
            drop_recall: drop.recall,
        };
        self.epoch = epoch;
        let timing = EpochTiming {
            epoch,
            wall_time_seconds: whole.seconds(),
            train_seconds,
        };
        Ok((metrics, timing))
    }

    /// Per-sample statistic over the whole training set under the current
    /// network, against the observed labels.
    pub fn train_scores(&self, statistic: Statistic) -> Result<Vec<f64>> {
        let probs = predict_probs(&self.net, self.train.features())?;
        probs
            .rows()
            .into_iter()
            .zip(self.train.observed_labels())
            .map(|(row, &y)| statistic.score(row.as_slice().expect("contiguous"), y))
            .collect()
    }

    /// Full-training-set histogram of `statistic`, split by ground truth.
    pub fn snapshot(&self, statistic: Statistic) -> Result<LabeledHistogram> {
        let scores = self.train_scores(statistic)?;
        let noisy: Vec<bool> = (0..self.train.len()).map(|r| self.train.is_noisy(r)).collect();
        LabeledHistogram::build(&scores, &noisy, self.config.selector.bins)
    }
}
