//! Minimal dense classifier trained with per-sample weighted cross-entropy.

mod backward;
pub mod checkpoint;
mod gradcheck;
mod loss;
mod network;
mod optim;

pub use self::backward::{backward, GradReduction, Gradients};
pub use self::gradcheck::{batch_loss, check_gradients, GradCheckReport, REL_ERROR_FLOOR};
pub use self::loss::{softmax, softmax_rows, weighted_ce_loss, ProbVector, SampleWeight, LOG_CLAMP};
pub use self::network::{forward, forward_features, init_network, Activation, Dense, ForwardCache, Network};
pub use self::optim::{sgd_momentum_step, OptimizerState};

use ndarray::{s, Array2};

use crate::data::LabeledDataset;
use crate::error::Result;

const EVAL_CHUNK: usize = 1024;

/// Softmax probabilities for every row of `features`, computed in chunks.
pub fn predict_probs(net: &Network, features: &Array2<f64>) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((features.nrows(), net.num_classes()));
    let mut start = 0;
    while start < features.nrows() {
        let end = (start + EVAL_CHUNK).min(features.nrows());
        let chunk = features.slice(s![start..end, ..]).to_owned();
        let (logits, _) = forward_features(net, &chunk)?;
        out.slice_mut(s![start..end, ..]).assign(&softmax_rows(&logits)?);
        start = end;
    }
    Ok(out)
}

/// Index of the largest entry; ties go to the smallest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Fraction of samples whose predicted class equals the true label.
pub fn evaluate(net: &Network, dataset: &LabeledDataset) -> Result<f64> {
    let probs = predict_probs(net, dataset.features())?;
    let correct = probs
        .rows()
        .into_iter()
        .zip(dataset.true_labels())
        .filter(|(row, &y)| argmax(row.as_slice().expect("contiguous")) == y)
        .count();
    Ok(correct as f64 / dataset.len() as f64)
}
