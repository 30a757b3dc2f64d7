use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::loss::SampleWeight;
use super::network::{ForwardCache, Network};
use crate::error::{argument, shape, Error, Result};

/// How per-sample gradients are combined across a mini-batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradReduction {
    /// Divide by the full batch size, zero-weighted samples included.
    #[default]
    Mean,
    /// Plain sum over samples.
    Sum,
}

impl GradReduction {
    pub(crate) fn scale(self, batch_size: usize) -> f64 {
        match self {
            GradReduction::Mean => 1.0 / batch_size as f64,
            GradReduction::Sum => 1.0,
        }
    }
}

impl fmt::Display for GradReduction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GradReduction::Mean => "mean",
            GradReduction::Sum => "sum",
        })
    }
}

impl FromStr for GradReduction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(GradReduction::Mean),
            "sum" => Ok(GradReduction::Sum),
            other => Err(argument(format!(
                "unknown grad reduction '{other}' (expected mean or sum)"
            ))),
        }
    }
}

/// Parameter-shaped tensors: gradients, or the optimizer's velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Gradients {
            weights: net
                .layers()
                .iter()
                .map(|l| Array2::zeros(l.weight.raw_dim()))
                .collect(),
            biases: net
                .layers()
                .iter()
                .map(|l| Array1::zeros(l.bias.len()))
                .collect(),
        }
    }

    pub(crate) fn matches(&self, net: &Network) -> bool {
        self.weights.len() == net.layers().len()
            && self.biases.len() == net.layers().len()
            && net.layers().iter().enumerate().all(|(i, l)| {
                self.weights[i].raw_dim() == l.weight.raw_dim() && self.biases[i].len() == l.bias.len()
            })
    }

    /// Every entry in layer order, weights before biases.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
    }

    pub fn is_zero(&self) -> bool {
        self.iter().all(|v| v == 0.0)
    }
}

/// Gradient of `scale * sum_s omega_s * CE_s` with respect to every
/// parameter, where `scale` is set by `reduction`.
///
/// The softmax-cross-entropy derivative with respect to the logits is
/// `p - onehot(y)`; the log clamp does not alter it.
pub fn backward(
    net: &Network,
    cache: &ForwardCache,
    probs: &Array2<f64>,
    labels: &[usize],
    omegas: &[SampleWeight],
    reduction: GradReduction,
) -> Result<Gradients> {
    let batch = cache.batch_size();
    let classes = net.num_classes();
    if probs.dim() != (batch, classes) || labels.len() != batch || omegas.len() != batch {
        return Err(shape(format!(
            "backward: cache has {batch} samples, probs are {:?}, {} labels, {} weights",
            probs.dim(),
            labels.len(),
            omegas.len()
        )));
    }
    if cache.inputs.len() != net.layers().len() {
        return Err(shape("forward cache does not belong to this network"));
    }

    let scale = reduction.scale(batch);
    let mut delta = Array2::zeros((batch, classes));
    for s in 0..batch {
        let y = labels[s];
        if y >= classes {
            return Err(argument(format!("label {y} outside [0, {classes})")));
        }
        if omegas[s].is_kept() {
            for m in 0..classes {
                let q = if m == y { 1.0 } else { 0.0 };
                delta[[s, m]] = (probs[[s, m]] - q) * scale;
            }
        }
    }

    let depth = net.layers().len();
    let mut weights = vec![Array2::zeros((0, 0)); depth];
    let mut biases = vec![Array1::zeros(0); depth];
    for l in (0..depth).rev() {
        let input = &cache.inputs[l];
        weights[l] = input.t().dot(&delta);
        let mut bias = Array1::zeros(delta.ncols());
        for row in delta.axis_iter(Axis(0)) {
            bias += &row;
        }
        biases[l] = bias;
        if l > 0 {
            let mut upstream = delta.dot(&net.layers()[l].weight.t());
            let z = &cache.pre_activations[l - 1];
            let act = net.activation();
            ndarray::Zip::from(&mut upstream)
                .and(z)
                .and(input)
                .for_each(|g, &z, &a| *g *= act.derivative(z, a));
            delta = upstream;
        }
    }
    Ok(Gradients { weights, biases })
}
