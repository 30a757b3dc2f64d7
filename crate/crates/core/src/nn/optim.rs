use super::backward::Gradients;
use super::network::Network;
use crate::error::{argument, shape, Result};

/// Heavy-ball SGD state: `v <- momentum * v + g`, `w <- w - lr * v`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub velocity: Gradients,
    pub learning_rate: f64,
    pub momentum: f64,
}

impl OptimizerState {
    pub fn new(net: &Network, learning_rate: f64, momentum: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(argument(format!("learning rate must be positive, got {learning_rate}")));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(argument(format!("momentum must lie in [0, 1), got {momentum}")));
        }
        Ok(OptimizerState {
            velocity: Gradients::zeros_like(net),
            learning_rate,
            momentum,
        })
    }
}

pub fn sgd_momentum_step(net: &mut Network, grads: &Gradients, state: &mut OptimizerState) -> Result<()> {
    if !grads.matches(net) || !state.velocity.matches(net) {
        return Err(shape("gradient or velocity shape does not match the network"));
    }
    let (lr, mu) = (state.learning_rate, state.momentum);
    for (l, layer) in net.layers_mut().iter_mut().enumerate() {
        let v = &mut state.velocity.weights[l];
        ndarray::Zip::from(&mut layer.weight)
            .and(v)
            .and(&grads.weights[l])
            .for_each(|w, v, &g| {
                *v = mu * *v + g;
                *w -= lr * *v;
            });
        let v = &mut state.velocity.biases[l];
        ndarray::Zip::from(&mut layer.bias)
            .and(v)
            .and(&grads.biases[l])
            .for_each(|b, v, &g| {
                *v = mu * *v + g;
                *b -= lr * *v;
            });
    }
    Ok(())
}
