use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, Mlp};
use crate::error::{self, Result};

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl Adam {
    /// Adam with β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self::with_betas(n_params, lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(n_params: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self { lr, beta1, beta2, eps, m: vec![0.0; n_params], v: vec![0.0; n_params], step: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return error::config("Adam state, parameters and gradients must have equal length");
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        debug_assert!(params.iter().all(|p| p.is_finite()), "Adam produced non-finite parameters");
        Ok(())
    }
}

/// Plain gradient descent step.
pub fn sgd_step(params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
    if params.len() != grads.len() {
        return error::config("parameter/gradient length mismatch");
    }
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= lr * g;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer {
    Sgd { lr: f64 },
    Adam(Adam),
}

impl Optimizer {
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        match self {
            Optimizer::Sgd { lr } => sgd_step(params, grads, *lr),
            Optimizer::Adam(adam) => adam.step(params, grads),
        }
    }
}

/// One descent step on the mean loss of `batch`.
///
/// `loss_fn` must return the mean batch loss and write the gradient of that
/// mean into the (zeroed) gradient buffer it receives.
pub fn sgd_minibatch<T, F>(net: &mut Mlp, batch: &[T], loss_fn: F, optimizer: &mut Optimizer) -> Result<f64>
where
    F: FnOnce(&Mlp, &[T], &mut Gradients) -> Result<f64>,
{
    if batch.is_empty() {
        return error::argument("mini-batch must not be empty");
    }
    let mut grads = Gradients::zeros_like(net);
    let loss = loss_fn(net, batch, &mut grads)?;
    optimizer.step(net.params_mut(), &grads.values)?;
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Matrix};

    #[test]
    fn zero_gradient_from_fresh_state_leaves_params() {
        let mut adam = Adam::new(3, 1e-3);
        let mut p = vec![1.0, -2.0, 3.0];
        adam.step(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn zero_gradient_decays_moments() {
        let mut adam = Adam::new(1, 1e-3);
        let mut p = vec![0.0];
        adam.step(&mut p, &[2.0]).unwrap();
        let (m, v) = (adam.first_moment()[0], adam.second_moment()[0]);
        adam.step(&mut p, &[0.0]).unwrap();
        assert!((adam.first_moment()[0] - 0.9 * m).abs() < 1e-15);
        assert!((adam.second_moment()[0] - 0.999 * v).abs() < 1e-15);
    }

    #[test]
    fn first_step_closed_form() {
        // m̂ = g, v̂ = g² on the first step, so the update is -lr·g/(|g|+ε).
        let lr = 1e-3;
        let g = [0.5, -3.0, 1e-9, 0.0];
        let mut adam = Adam::new(4, lr);
        let mut p = vec![0.0; 4];
        adam.step(&mut p, &g).unwrap();
        for (pi, gi) in p.iter().zip(g) {
            let expected = -lr * gi / (gi.abs() + 1e-8);
            assert!((pi - expected).abs() < 1e-15, "{pi} vs {expected}");
        }
    }

    #[test]
    fn constant_gradient_converges_to_signed_lr() {
        let lr = 1e-2;
        let mut adam = Adam::new(2, lr);
        let mut p = vec![0.0, 0.0];
        let mut prev = p.clone();
        for _ in 0..5000 {
            prev.clone_from(&p);
            adam.step(&mut p, &[0.3, -7.0]).unwrap();
        }
        assert!(((p[0] - prev[0]) + lr).abs() < 1e-6);
        assert!(((p[1] - prev[1]) - lr).abs() < 1e-6);
    }

    fn quadratic(net: &Mlp, batch: &[(f64, f64)], grads: &mut Gradients) -> Result<f64> {
        let x = Matrix::from_vec(batch.len(), 1, batch.iter().map(|b| b.0).collect())?;
        let cache = net.forward_cached(x)?;
        let n = batch.len() as f64;
        let mut og = Matrix::zeros(batch.len(), 1);
        let mut loss = 0.0;
        for (i, (_, y)) in batch.iter().enumerate() {
            let r = cache.output().get(i, 0) - y;
            loss += 0.5 * r * r / n;
            og.set(i, 0, r / n);
        }
        net.backward(&cache, &og, grads)?;
        Ok(loss)
    }

    #[test]
    fn empty_batch_is_argument_error() {
        let mut net = Mlp::zeros(&[1, 1], &[Activation::Identity]).unwrap();
        let batch: [(f64, f64); 0] = [];
        let r = sgd_minibatch(&mut net, &batch, quadratic, &mut Optimizer::Sgd { lr: 0.1 });
        assert!(matches!(r, Err(crate::Error::Argument(_))));
    }

    #[test]
    fn zero_lr_leaves_params() {
        let mut net = Mlp::from_params(&[1, 1], &[Activation::Identity], vec![0.4, -0.1]).unwrap();
        let batch = [(1.0, 2.0), (-1.0, 0.5)];
        sgd_minibatch(&mut net, &batch, quadratic, &mut Optimizer::Sgd { lr: 0.0 }).unwrap();
        assert_eq!(net.params(), &[0.4, -0.1]);
    }

    #[test]
    fn convex_descent_is_monotone() {
        let mut net = Mlp::from_params(&[1, 1], &[Activation::Identity], vec![3.0, -2.0]).unwrap();
        let batch: Vec<(f64, f64)> = (0..10).map(|i| (i as f64 * 0.1, 2.0 * i as f64 * 0.1 + 1.0)).collect();
        let mut opt = Optimizer::Sgd { lr: 0.05 };
        let mut last = f64::INFINITY;
        for _ in 0..100 {
            let loss = sgd_minibatch(&mut net, &batch, quadratic, &mut opt).unwrap();
            assert!(loss <= last + 1e-15);
            last = loss;
        }
    }

    #[test]
    fn minibatch_with_adam_reduces_to_manual_adam_steps() {
        let start = Mlp::from_params(&[1, 1], &[Activation::Identity], vec![0.7, 0.2]).unwrap();
        let batch = [(0.5, 1.0), (1.5, -1.0), (-0.3, 0.2)];
        let mut via_minibatch = start.clone();
        let mut opt = Optimizer::Adam(Adam::with_betas(2, 1e-2, 0.0, 0.0, 1e-8));
        let mut manual = start.clone();
        let mut adam = Adam::with_betas(2, 1e-2, 0.0, 0.0, 1e-8);
        for _ in 0..20 {
            sgd_minibatch(&mut via_minibatch, &batch, quadratic, &mut opt).unwrap();
            let mut g = Gradients::zeros_like(&manual);
            quadratic(&manual, &batch, &mut g).unwrap();
            // With β₁ = β₂ = 0 the Adam step is -lr·g/(|g|+ε).
            let expected: Vec<f64> =
                manual.params().iter().zip(&g.values).map(|(p, gi)| p - 1e-2 * gi / (gi.abs() + 1e-8)).collect();
            adam.step(manual.params_mut(), &g.values).unwrap();
            for (a, b) in manual.params().iter().zip(&expected) {
                assert!((a - b).abs() < 1e-15);
            }
        }
        assert_eq!(via_minibatch.params(), manual.params());
    }
}
