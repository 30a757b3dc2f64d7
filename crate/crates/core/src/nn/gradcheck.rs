//! Central finite-difference check of [`backward`].
//!
//! The numeric side only ever calls the forward pass and the loss, so it is
//! independent of the backpropagation code it verifies.

use ndarray::Array2;

use super::backward::{backward, GradReduction};
use super::loss::{softmax_rows, weighted_ce_loss, SampleWeight};
use super::network::{forward_features, Network};
use crate::error::Result;

/// Reduced, weighted cross-entropy of a batch.
pub fn batch_loss(
    net: &Network,
    features: &Array2<f64>,
    labels: &[usize],
    omegas: &[SampleWeight],
    reduction: GradReduction,
) -> Result<f64> {
    let (logits, _) = forward_features(net, features)?;
    let probs = softmax_rows(&logits)?;
    let mut total = 0.0;
    for (s, row) in probs.rows().into_iter().enumerate() {
        total += weighted_ce_loss(row.as_slice().expect("contiguous"), labels[s], omegas[s])?;
    }
    Ok(total * reduction.scale(labels.len()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|, floor)`.
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub checked: usize,
    /// Coordinates skipped because the perturbation flipped a ReLU on/off.
    pub kink_crossings: usize,
}

/// Magnitude below which errors are judged on an absolute scale.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

pub fn check_gradients(
    net: &Network,
    features: &Array2<f64>,
    labels: &[usize],
    omegas: &[SampleWeight],
    reduction: GradReduction,
    step: f64,
) -> Result<GradCheckReport> {
    let (logits, cache) = forward_features(net, features)?;
    let probs = softmax_rows(&logits)?;
    let analytic = backward(net, &cache, &probs, labels, omegas, reduction)?;
    let pattern = activation_pattern(net, features)?;

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        checked: 0,
        kink_crossings: 0,
    };
    let mut probe = net.clone();
    for l in 0..net.layers().len() {
        let coords: Vec<(bool, usize, usize)> = {
            let (rows, cols) = net.layers()[l].weight.dim();
            (0..rows)
                .flat_map(|r| (0..cols).map(move |c| (true, r, c)))
                .chain((0..cols).map(|c| (false, 0, c)))
                .collect()
        };
        for (is_weight, r, c) in coords {
            let original = param(&probe, l, is_weight, r, c);
            *param_mut(&mut probe, l, is_weight, r, c) = original + step;
            let plus = batch_loss(&probe, features, labels, omegas, reduction)?;
            let crossed_plus = activation_pattern(&probe, features)? != pattern;
            *param_mut(&mut probe, l, is_weight, r, c) = original - step;
            let minus = batch_loss(&probe, features, labels, omegas, reduction)?;
            let crossed_minus = activation_pattern(&probe, features)? != pattern;
            *param_mut(&mut probe, l, is_weight, r, c) = original;
            if crossed_plus || crossed_minus {
                report.kink_crossings += 1;
                continue;
            }

            let numeric = (plus - minus) / (2.0 * step);
            let exact = if is_weight {
                analytic.weights[l][[r, c]]
            } else {
                analytic.biases[l][c]
            };
            let abs = (exact - numeric).abs();
            let rel = abs / exact.abs().max(numeric.abs()).max(REL_ERROR_FLOOR);
            report.max_abs_error = report.max_abs_error.max(abs);
            report.max_rel_error = report.max_rel_error.max(rel);
            report.checked += 1;
        }
    }
    Ok(report)
}

fn param(net: &Network, l: usize, is_weight: bool, r: usize, c: usize) -> f64 {
    if is_weight {
        net.layers()[l].weight[[r, c]]
    } else {
        net.layers()[l].bias[c]
    }
}

fn param_mut(net: &mut Network, l: usize, is_weight: bool, r: usize, c: usize) -> &mut f64 {
    if is_weight {
        &mut net.layers_mut()[l].weight[[r, c]]
    } else {
        &mut net.layers_mut()[l].bias[c]
    }
}

/// Sign pattern of every hidden pre-activation (only meaningful for ReLU;
/// smooth activations never report a crossing).
fn activation_pattern(net: &Network, features: &Array2<f64>) -> Result<Vec<bool>> {
    if net.activation() != super::Activation::Relu {
        return Ok(Vec::new());
    }
    let (_, cache) = forward_features(net, features)?;
    Ok((0..net.layers().len() - 1)
        .flat_map(|l| cache.pre_activation(l).iter().map(|&z| z > 0.0).collect::<Vec<_>>())
        .collect())
}
