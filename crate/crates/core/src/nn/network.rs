use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Batch;
use crate::error::{argument, shape, Error, Result};
use crate::rng;

/// Elementwise nonlinearity applied between dense layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    pub(crate) fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(argument(format!("unknown activation '{other}'"))),
        }
    }
}

/// Fully connected layer computing `x W + b`, with `W` stored `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Multi-layer perceptron: dense layers with one shared nonlinearity between
/// them and raw logits out of the last layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub(crate) layers: Vec<Dense>,
    pub(crate) activation: Activation,
}

/// Intermediates kept by [`forward`] for [`super::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to every layer; `inputs[0]` is the batch itself.
    pub(crate) inputs: Vec<Array2<f64>>,
    /// Pre-activations of every hidden layer.
    pub(crate) pre_activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    /// ReLU/tanh pre-activation values of hidden layer `l`.
    pub fn pre_activation(&self, layer: usize) -> &Array2<f64> {
        &self.pre_activations[layer]
    }

    pub fn batch_size(&self) -> usize {
        self.inputs[0].nrows()
    }
}

impl Network {
    pub fn from_layers(layers: Vec<Dense>, activation: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(argument("a network needs at least one layer"));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.weight.ncols() != layer.bias.len() {
                return Err(shape(format!(
                    "layer {i}: weight has {} outputs, bias has {}",
                    layer.weight.ncols(),
                    layer.bias.len()
                )));
            }
            if let Some(next) = layers.get(i + 1) {
                if next.weight.nrows() != layer.weight.ncols() {
                    return Err(shape(format!(
                        "layer {} expects {} inputs but layer {i} produces {}",
                        i + 1,
                        next.weight.nrows(),
                        layer.weight.ncols()
                    )));
                }
            }
            if layer.weight.iter().chain(layer.bias.iter()).any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("layer {i} has non-finite parameters")));
            }
        }
        Ok(Network { layers, activation })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// `[D, h_1, ..., C]`.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].weight.nrows()];
        dims.extend(self.layers.iter().map(|l| l.weight.ncols()));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weight.ncols())
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }
}

/// LeCun-normal weights (`N(0, 1) / sqrt(fan_in)`) and zero biases.
pub fn init_network(layer_dims: &[usize], activation: Activation, seed: u64) -> Result<Network> {
    if layer_dims.len() < 2 {
        return Err(argument(format!(
            "need at least input and output dims, got {layer_dims:?}"
        )));
    }
    if layer_dims.contains(&0) {
        return Err(argument(format!("layer dims must be positive, got {layer_dims:?}")));
    }
    let mut rng = rng::stream(seed, rng::INIT, 0);
    let layers = layer_dims
        .windows(2)
        .map(|pair| {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let scale = 1.0 / (fan_in as f64).sqrt();
            let weight = Array2::from_shape_simple_fn((fan_in, fan_out), || {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * scale
            });
            Dense {
                weight,
                bias: Array1::zeros(fan_out),
            }
        })
        .collect();
    Network::from_layers(layers, activation)
}

/// Forward pass over a batch of feature rows. Returns the logits and the
/// cache needed for backpropagation.
pub fn forward_features(net: &Network, features: &Array2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
    if features.ncols() != net.input_dim() {
        return Err(shape(format!(
            "features have {} columns, network expects {}",
            features.ncols(),
            net.input_dim()
        )));
    }
    let mut inputs = Vec::with_capacity(net.layers.len());
    let mut pre_activations = Vec::with_capacity(net.layers.len() - 1);
    let mut current = features.to_owned();
    let last = net.layers.len() - 1;
    for (i, layer) in net.layers.iter().enumerate() {
        let mut z = current.dot(&layer.weight);
        z += &layer.bias.view().insert_axis(Axis(0));
        inputs.push(current);
        if i == last {
            return Ok((
                z,
                ForwardCache {
                    inputs,
                    pre_activations,
                },
            ));
        }
        current = z.mapv(|v| net.activation.apply(v));
        pre_activations.push(z);
    }
    unreachable!("network has at least one layer")
}

pub fn forward(net: &Network, batch: &Batch) -> Result<(Array2<f64>, ForwardCache)> {
    forward_features(net, &batch.features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn init_is_seeded_with_zero_biases() {
        let a = init_network(&[784, 256, 10], Activation::Relu, 5).unwrap();
        let b = init_network(&[784, 256, 10], Activation::Relu, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.layer_dims(), vec![784, 256, 10]);
        assert!(a.layers().iter().all(|l| l.bias.iter().all(|&v| v == 0.0)));
        assert_ne!(a, init_network(&[784, 256, 10], Activation::Relu, 6).unwrap());
        assert!(init_network(&[4], Activation::Relu, 0).is_err());
        assert!(init_network(&[], Activation::Relu, 0).is_err());
    }

    #[test]
    fn identity_layer_passes_features_through() {
        let net = Network::from_layers(
            vec![Dense {
                weight: Array2::eye(3),
                bias: Array1::zeros(3),
            }],
            Activation::Relu,
        )
        .unwrap();
        let x = array![[0.1, 0.5, 0.9], [1.0, 0.0, 0.3]];
        let (logits, _) = forward_features(&net, &x).unwrap();
        assert_eq!(logits, x);
    }

    #[test]
    fn zero_input_gives_zero_logits() {
        let net = init_network(&[5, 4, 3], Activation::Relu, 1).unwrap();
        let (logits, _) = forward_features(&net, &Array2::zeros((2, 5))).unwrap();
        assert!(logits.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn batching_is_row_independent() {
        let net = init_network(&[3, 6, 2], Activation::Tanh, 2).unwrap();
        let x = array![[0.2, 0.4, 0.6], [0.9, 0.1, 0.5]];
        let (both, _) = forward_features(&net, &x).unwrap();
        for r in 0..2 {
            let row = x.slice(ndarray::s![r..r + 1, ..]).to_owned();
            let (single, _) = forward_features(&net, &row).unwrap();
            assert_eq!(single.row(0), both.row(r));
        }
    }

    #[test]
    fn dimension_mismatch_is_a_shape_error() {
        let net = init_network(&[3, 2], Activation::Relu, 0).unwrap();
        assert!(matches!(
            forward_features(&net, &Array2::zeros((1, 4))),
            Err(Error::Shape(_))
        ));
    }
}
