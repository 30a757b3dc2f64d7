use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};

/// Lower clamp applied to `p_y` before taking the log.
pub const LOG_CLAMP: f64 = 1e-12;

/// Softmax output of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Wraps an existing distribution after checking it sums to one.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(argument("probabilities must lie in [0, 1]"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(argument(format!("probabilities sum to {total}, not 1")));
        }
        Ok(ProbVector(probs))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl AsRef<[f64]> for ProbVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Binary per-sample loss weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SampleWeight {
    Drop,
    Keep,
}

impl SampleWeight {
    pub fn value(self) -> f64 {
        match self {
            SampleWeight::Drop => 0.0,
            SampleWeight::Keep => 1.0,
        }
    }

    pub fn is_kept(self) -> bool {
        self == SampleWeight::Keep
    }
}

fn softmax_into(logits: ArrayView1<'_, f64>, out: &mut [f64]) -> Result<()> {
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(Error::Numeric("non-finite logit".into()));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &z) in out.iter_mut().zip(logits.iter()) {
        *o = (z - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
    Ok(())
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Result<ProbVector> {
    let mut out = vec![0.0; logits.len()];
    softmax_into(ArrayView1::from(logits), &mut out)?;
    Ok(ProbVector(out))
}

/// Row-wise softmax of a `S x C` logit matrix.
pub fn softmax_rows(logits: &Array2<f64>) -> Result<Array2<f64>> {
    let mut probs = Array2::zeros(logits.raw_dim());
    for (row, mut out) in logits.rows().into_iter().zip(probs.rows_mut()) {
        let out = out
            .as_slice_mut()
            .expect("freshly allocated rows are contiguous");
        softmax_into(row, out)?;
    }
    Ok(probs)
}

/// `-omega * ln(max(p_y, 1e-12))`.
pub fn weighted_ce_loss(probs: &[f64], y: usize, omega: SampleWeight) -> Result<f64> {
    let p_y = *probs
        .get(y)
        .ok_or_else(|| argument(format!("label {y} outside [0, {})", probs.len())))?;
    match omega {
        SampleWeight::Drop => Ok(0.0),
        SampleWeight::Keep => Ok(-p_y.max(LOG_CLAMP).ln()),
    }
}
