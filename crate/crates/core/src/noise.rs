//! Closed-set label corruption (symmetry and pair flipping) and scoring of
//! drop sets against the hidden ground truth.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{argument, state, Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    /// Flip to any other class with equal probability.
    Symmetry,
    /// Flip class `c` to `(c + 1) mod C`.
    Pair,
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::Symmetry => "symmetry",
            NoiseKind::Pair => "pair",
        })
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetry" | "symmetric" => Ok(NoiseKind::Symmetry),
            "pair" => Ok(NoiseKind::Pair),
            other => Err(argument(format!(
                "unknown noise kind '{other}' (expected symmetry or pair)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// Fraction of samples whose label is flipped, in [0, 1).
    pub rate: f64,
}

impl NoiseSpec {
    pub fn clean() -> Self {
        NoiseSpec {
            kind: NoiseKind::Symmetry,
            rate: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.rate) {
            return Err(argument(format!(
                "noise rate must lie in [0, 1), got {}",
                self.rate
            )));
        }
        Ok(())
    }
}

/// Row-stochastic `C x C` matrix: entry `(i, j)` is the probability that a
/// sample of class `i` is observed with label `j`.
pub fn build_transition_matrix(kind: NoiseKind, tau: f64, classes: usize) -> Result<Array2<f64>> {
    if classes < 2 {
        return Err(argument(format!("need at least 2 classes, got {classes}")));
    }
    NoiseSpec { kind, rate: tau }.validate()?;
    let mut t = Array2::zeros((classes, classes));
    for i in 0..classes {
        t[[i, i]] = 1.0 - tau;
        match kind {
            NoiseKind::Symmetry => {
                let off = tau / (classes - 1) as f64;
                for j in (0..classes).filter(|&j| j != i) {
                    t[[i, j]] = off;
                }
            }
            NoiseKind::Pair => t[[i, (i + 1) % classes]] = tau,
        }
    }
    Ok(t)
}

/// Number of labels a corruption at `rate` flips in a dataset of `n` samples.
pub fn flip_count(rate: f64, n: usize) -> usize {
    // The epsilon absorbs representation error such as 0.29 * 100 = 28.999...
    ((rate * n as f64) + 1e-9).floor() as usize
}

/// Flips exactly `floor(rate * N)` labels, chosen by a seeded permutation.
pub fn corrupt(dataset: &LabeledDataset, spec: &NoiseSpec, seed: u64) -> Result<LabeledDataset> {
    spec.validate()?;
    if dataset.is_corrupted() || dataset.noisy_count() > 0 {
        return Err(state("dataset is already corrupted"));
    }
    let n = dataset.len();
    let classes = dataset.num_classes();
    let mut rng = rng::stream(seed, rng::CORRUPT, 0);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let mut observed = dataset.observed_labels().to_vec();
    for &row in &order[..flip_count(spec.rate, n)] {
        let y = observed[row];
        observed[row] = match spec.kind {
            NoiseKind::Pair => (y + 1) % classes,
            NoiseKind::Symmetry => {
                let k = rng.random_range(0..classes - 1);
                if k < y {
                    k
                } else {
                    k + 1
                }
            }
        };
    }
    dataset.with_observed_labels(observed)
}

/// Quality of a set of dropped samples against the hidden ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropSetScore {
    /// Fraction of dropped samples that are truly noisy (0 if nothing dropped).
    pub precision: f64,
    /// Fraction of truly noisy samples that were dropped (1 if none is noisy).
    pub recall: f64,
    pub dropped_count: usize,
}

pub fn score_drop_set(dataset: &LabeledDataset, dropped_ids: &[usize]) -> Result<DropSetScore> {
    let mut rows = BTreeSet::new();
    for &id in dropped_ids {
        let row = dataset
            .position_of(id)
            .ok_or_else(|| argument(format!("sample id {id} is not in the dataset")))?;
        rows.insert(row);
    }
    Ok(score_rows(dataset, rows.into_iter()))
}

/// Same as [`score_drop_set`] for distinct row positions.
pub(crate) fn score_rows(dataset: &LabeledDataset, rows: impl Iterator<Item = usize>) -> DropSetScore {
    let (mut dropped, mut noisy_dropped) = (0usize, 0usize);
    for row in rows {
        dropped += 1;
        if dataset.is_noisy(row) {
            noisy_dropped += 1;
        }
    }
    let total_noisy = dataset.noisy_count();
    DropSetScore {
        precision: if dropped == 0 {
            0.0
        } else {
            noisy_dropped as f64 / dropped as f64
        },
        recall: if total_noisy == 0 {
            1.0
        } else {
            noisy_dropped as f64 / total_noisy as f64
        },
        dropped_count: dropped,
    }
}
