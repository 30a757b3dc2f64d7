use serde::{Deserialize, Serialize};

use super::histogram::DiffWindow;
use super::threshold::{drop_rate, threshold_with_tau, threshold_without_tau, zeta, Threshold};
use crate::error::{argument, state, Result};

/// Selector hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectorConfig {
    /// Histogram bin count `H`.
    pub bins: usize,
    /// Window size as a fraction `M` of an epoch's mini-batches; 0 keeps only
    /// the current batch.
    pub window_fraction: f64,
    /// Epochs `T_k` over which the drop rate (or threshold) ramps up.
    pub ramp_epochs: usize,
    /// Known noise rate; `None` means estimate it.
    pub tau: Option<f64>,
    /// The noise rate is estimated once zeta exceeds this value.
    pub zeta_threshold: f64,
    pub batch_size: usize,
    pub iters_per_epoch: usize,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        SelectorConfig {
            bins: 200,
            window_fraction: 0.2,
            ramp_epochs: 20,
            tau: None,
            zeta_threshold: 0.9,
            batch_size: 128,
            iters_per_epoch: 1,
        }
    }
}

impl SelectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 || !self.bins.is_multiple_of(2) {
            return Err(argument(format!("bin count must be even and >= 2, got {}", self.bins)));
        }
        if !(0.0..=1.0).contains(&self.window_fraction) {
            return Err(argument(format!(
                "window fraction must lie in [0, 1], got {}",
                self.window_fraction
            )));
        }
        if self.ramp_epochs == 0 {
            return Err(argument("ramp epochs must be >= 1"));
        }
        if let Some(tau) = self.tau {
            if !(0.0..1.0).contains(&tau) {
                return Err(argument(format!("tau must lie in [0, 1), got {tau}")));
            }
        }
        if !(self.zeta_threshold > 0.0 && self.zeta_threshold <= 1.0) {
            return Err(argument(format!(
                "zeta threshold must lie in (0, 1], got {}",
                self.zeta_threshold
            )));
        }
        if self.batch_size == 0 || self.iters_per_epoch == 0 {
            return Err(argument("batch size and iterations per epoch must be positive"));
        }
        Ok(())
    }

    /// `max(1, round(M * Iter_epoch)) * S_batch`.
    pub fn window_capacity(&self) -> usize {
        let batches = (self.window_fraction * self.iters_per_epoch as f64).round() as usize;
        batches.max(1) * self.batch_size
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Drop rate ramps to the given noise rate.
    WarmupKnownTau,
    /// Threshold ramps to zero while waiting for zeta to trigger estimation.
    WarmupNoTau,
    /// Noise rate estimated; thresholds follow it.
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauSource {
    /// Estimated during training when zeta crossed its threshold.
    Triggered,
    /// Zeta never crossed; estimated from the final window, report only.
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectorState {
    pub phase: Phase,
    pub delta_hat: Threshold,
    /// Current drop rate; `None` while the threshold follows the
    /// unknown-rate ramp.
    pub current_r: Option<f64>,
    /// Zeta of the window after the most recent push.
    pub zeta: Option<f64>,
    pub tau_est: Option<f64>,
    pub tau_source: Option<TauSource>,
    /// Epoch at which the estimate fired.
    pub estimated_at_epoch: Option<usize>,
    pub epoch: usize,
}

/// Fires the one-shot noise-rate estimate when the no-tau warmup has ended,
/// the window is full and zeta exceeds its threshold. Returns whether it fired.
pub fn maybe_estimate_tau(
    state_: &mut SelectorState,
    window: &DiffWindow,
    config: &SelectorConfig,
) -> Result<bool> {
    if state_.phase != Phase::WarmupNoTau {
        return Err(state(format!(
            "noise-rate estimation requires the no-tau warmup phase, selector is in {:?}",
            state_.phase
        )));
    }
    if state_.epoch < config.ramp_epochs || !window.is_full() {
        return Ok(false);
    }
    let z = zeta(window)?;
    state_.zeta = Some(z);
    if z <= config.zeta_threshold {
        return Ok(false);
    }
    let tau = window.negative_fraction()?;
    state_.tau_est = Some(tau);
    state_.tau_source = Some(TauSource::Triggered);
    state_.estimated_at_epoch = Some(state_.epoch);
    state_.phase = Phase::Estimated;
    state_.current_r = Some(tau);
    Ok(true)
}

/// Largest drop rate handed to the histogram threshold; an estimate of 1
/// would otherwise leave no bin with `PCF(x) > R`.
const MAX_RATE: f64 = 1.0 - 1e-12;

/// Drives the window and thresholds through a training run.
///
/// Per mini-batch: call [`Selector::threshold`] before the batch, weight the
/// samples with it, then [`Selector::observe`] the batch's statistics.
#[derive(Debug, Clone)]
pub struct Selector {
    config: SelectorConfig,
    window: DiffWindow,
    state: SelectorState,
}

impl Selector {
    pub fn new(config: SelectorConfig) -> Result<Self> {
        config.validate()?;
        let window = DiffWindow::new(config.window_capacity(), config.bins)?;
        let phase = if config.tau.is_some() {
            Phase::WarmupKnownTau
        } else {
            Phase::WarmupNoTau
        };
        Ok(Selector {
            config,
            window,
            state: SelectorState {
                phase,
                delta_hat: Threshold::SelectAll,
                current_r: None,
                zeta: None,
                tau_est: None,
                tau_source: None,
                estimated_at_epoch: None,
                epoch: 0,
            },
        })
    }

    pub fn config(&self) -> &SelectorConfig {
        &self.config
    }

    pub fn window(&self) -> &DiffWindow {
        &self.window
    }

    pub fn state(&self) -> &SelectorState {
        &self.state
    }

    /// Enters epoch `epoch` (1-based) and refreshes the threshold.
    pub fn begin_epoch(&mut self, epoch: usize) -> Result<()> {
        if epoch == 0 {
            return Err(argument("epochs are numbered from 1"));
        }
        self.state.epoch = epoch;
        self.state.current_r = match (self.state.phase, self.config.tau) {
            (Phase::WarmupKnownTau, Some(tau)) => Some(drop_rate(epoch, self.config.ramp_epochs, tau)),
            (Phase::Estimated, _) => self.state.tau_est,
            _ => None,
        };
        self.refresh_threshold()
    }

    /// Threshold for the next mini-batch.
    pub fn threshold(&self) -> Threshold {
        self.state.delta_hat
    }

    fn refresh_threshold(&mut self) -> Result<()> {
        self.state.delta_hat = match self.state.phase {
            Phase::WarmupNoTau => Threshold::Below {
                value: threshold_without_tau(self.state.epoch.max(1), self.config.ramp_epochs),
            },
            Phase::WarmupKnownTau | Phase::Estimated => {
                if self.window.total() < self.config.batch_size.min(self.window.capacity()) {
                    Threshold::SelectAll
                } else {
                    let rate = self.state.current_r.unwrap_or(0.0).min(MAX_RATE);
                    threshold_with_tau(&self.window, rate)?
                }
            }
        };
        Ok(())
    }

    /// Pushes a batch of statistics, updates zeta, possibly fires the
    /// noise-rate estimate and recomputes the threshold for the next batch.
    pub fn observe(&mut self, scores: &[f64]) -> Result<()> {
        if self.state.epoch == 0 {
            return Err(state("begin_epoch must be called before observe"));
        }
        self.window.push(scores)?;
        if !self.window.is_empty() {
            self.state.zeta = Some(zeta(&self.window)?);
        }
        if self.state.phase == Phase::WarmupNoTau {
            maybe_estimate_tau(&mut self.state, &self.window, &self.config)?;
        }
        self.refresh_threshold()
    }

    /// End of training: if the estimate never fired, estimate once from the
    /// final window for reporting.
    pub fn finish(&mut self) -> Result<()> {
        if self.state.phase == Phase::WarmupNoTau && self.state.tau_est.is_none() && !self.window.is_empty() {
            self.state.tau_est = Some(self.window.negative_fraction()?);
            self.state.tau_source = Some(TauSource::Fallback);
        }
        Ok(())
    }
}
