use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{self, Result};
use crate::nn::{Activation, Adam, Gradients, Matrix, Mlp};
use crate::rng::Rng;

/// State-value baseline `V(s)` trained by minibatch regression.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValueFunction {
    pub net: Mlp,
    adam: Adam,
    pub epochs: usize,
    pub minibatch: usize,
}

impl ValueFunction {
    pub fn new(state_dim: usize, hidden: &[usize], lr: f64, epochs: usize, minibatch: usize, rng: &mut Rng) -> Result<Self> {
        if minibatch == 0 {
            return error::config("value minibatch must be positive");
        }
        let mut sizes = vec![state_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let net = Mlp::new(&sizes, Activation::Tanh, Activation::Identity, 1.0, rng)?;
        let adam = Adam::new(net.param_count(), lr);
        Ok(Self { net, adam, epochs, minibatch })
    }

    pub fn predict(&self, state: &[f64]) -> Result<f64> {
        Ok(self.net.forward(state)?[0])
    }

    pub fn predict_batch(&self, states: &Matrix) -> Result<Vec<f64>> {
        Ok(self.net.forward_batch(states)?.into_data())
    }

    /// Mean squared error over one minibatch, accumulating its gradient.
    fn mse_step(&mut self, states: &Matrix, targets: &[f64]) -> Result<f64> {
        let n = targets.len() as f64;
        let cache = self.net.forward_cached(states.clone())?;
        let pred = cache.output();
        let mut out_grad = Matrix::zeros(targets.len(), 1);
        let mut loss = 0.0;
        for (i, t) in targets.iter().enumerate() {
            let e = pred.get(i, 0) - t;
            loss += e * e / n;
            out_grad.set(i, 0, 2.0 * e / n);
        }
        let mut g = Gradients::zeros_like(&self.net);
        self.net.backward(&cache, &out_grad, &mut g)?;
        self.adam.step(self.net.params_mut(), &g.values)?;
        Ok(loss)
    }
}

/// Regresses `V` onto `returns` for `value_fn.epochs` shuffled passes.
/// Returns the minibatch losses in order.
pub fn fit_value_fn(value_fn: &mut ValueFunction, states: &[Vec<f64>], returns: &[f64], rng: &mut Rng) -> Result<Vec<f64>> {
    if states.len() != returns.len() {
        return error::argument("states and returns differ in length");
    }
    if states.is_empty() {
        return error::argument("cannot fit a value function on no data");
    }
    let mut idx: Vec<usize> = (0..states.len()).collect();
    let mut losses = Vec::new();
    for _ in 0..value_fn.epochs {
        idx.shuffle(rng);
        for chunk in idx.chunks(value_fn.minibatch) {
            let rows: Vec<&[f64]> = chunk.iter().map(|&i| states[i].as_slice()).collect();
            let targets: Vec<f64> = chunk.iter().map(|&i| returns[i]).collect();
            let x = Matrix::from_rows(&rows)?;
            losses.push(value_fn.mse_step(&x, &targets)?);
        }
    }
    Ok(losses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;

    #[test]
    fn fits_a_linear_target() {
        let mut rng = SeedTree::new(5).rng();
        let mut vf = ValueFunction::new(2, &[32, 32], 3e-3, 200, 32, &mut rng).unwrap();
        let states: Vec<Vec<f64>> = (0..128).map(|i| vec![(i % 16) as f64 / 8.0 - 1.0, (i / 16) as f64 / 4.0 - 1.0]).collect();
        let returns: Vec<f64> = states.iter().map(|s| 2.0 * s[0] - s[1]).collect();
        let losses = fit_value_fn(&mut vf, &states, &returns, &mut rng).unwrap();
        assert!(losses.last().unwrap() < &0.01, "final loss {}", losses.last().unwrap());
    }
}
