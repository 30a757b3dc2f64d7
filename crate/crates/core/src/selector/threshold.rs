use std::fmt;

use serde::{Serialize, Serializer};

use super::histogram::{lower_edge, DiffWindow};
use crate::error::{argument, state, Result};
use crate::nn::SampleWeight;

/// Selection threshold for one mini-batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// Train on every sample.
    SelectAll,
    /// Keep samples whose statistic is strictly above `value`. At the bottom
    /// edge `-1` the whole of bin 1 is kept, `-1` itself included, since the
    /// bin rule folds that point into bin 1.
    Below { value: f64 },
}

impl Threshold {
    pub fn value(self) -> Option<f64> {
        match self {
            Threshold::SelectAll => None,
            Threshold::Below { value } => Some(value),
        }
    }

    pub fn keeps(self, delta: f64) -> bool {
        match self {
            Threshold::SelectAll => true,
            Threshold::Below { value } => delta > value || value <= -1.0,
        }
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::SelectAll => f.write_str("select-all"),
            Threshold::Below { value } => write!(f, "{value}"),
        }
    }
}

impl Serialize for Threshold {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self.value() {
            Some(v) => serializer.serialize_f64(v),
            None => serializer.serialize_none(),
        }
    }
}

/// Drop rate ramp `tau * min(T / T_k, 1)`.
pub fn drop_rate(epoch: usize, ramp_epochs: usize, tau: f64) -> f64 {
    tau * (epoch as f64 / ramp_epochs as f64).min(1.0)
}

/// Smallest bin `x` whose cumulative count exceeds `rate * total`; the
/// threshold is its lower edge. An empty window selects everything.
///
/// Comparing integer counts against `rate * total` is the same test as
/// `PCF(x) > rate` without the rounding of the division.
pub fn threshold_with_tau(window: &DiffWindow, rate: f64) -> Result<Threshold> {
    Ok(match threshold_bin(window.bin_counts(), rate)? {
        Some(x) => Threshold::Below {
            value: lower_edge(x, window.bins()),
        },
        None => Threshold::SelectAll,
    })
}

/// `x*` for raw bin counts, `None` when the counts are all zero.
pub(crate) fn threshold_bin(counts: &[u64], rate: f64) -> Result<Option<usize>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(argument(format!("drop rate must lie in [0, 1), got {rate}")));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Ok(None);
    }
    let target = rate * total as f64;
    let mut running = 0u64;
    for (i, &c) in counts.iter().enumerate() {
        running += c;
        if running as f64 > target {
            return Ok(Some(i + 1));
        }
    }
    unreachable!("running count reaches total > rate * total")
}

/// Threshold ramp `min(T / T_k, 1) - 1` used when the noise rate is unknown.
pub fn threshold_without_tau(epoch: usize, ramp_epochs: usize) -> f64 {
    (epoch as f64 / ramp_epochs as f64).min(1.0) - 1.0
}

/// Expected absolute bin lower edge under the window's pdf.
pub fn zeta(window: &DiffWindow) -> Result<f64> {
    zeta_of_counts(window.bin_counts())
}

pub(crate) fn zeta_of_counts(counts: &[u64]) -> Result<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(state("cannot compute zeta of an empty window"));
    }
    let bins = counts.len();
    Ok(counts
        .iter()
        .enumerate()
        .map(|(i, &c)| lower_edge(i + 1, bins).abs() * (c as f64 / total as f64))
        .sum())
}

/// `Keep` iff the statistic is strictly above the threshold.
pub fn weights(deltas: &[f64], threshold: Threshold) -> Vec<SampleWeight> {
    deltas
        .iter()
        .map(|&d| {
            if threshold.keeps(d) {
                SampleWeight::Keep
            } else {
                SampleWeight::Drop
            }
        })
        .collect()
}
