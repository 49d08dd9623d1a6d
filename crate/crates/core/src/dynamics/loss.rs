use serde::{Deserialize, Serialize};

use super::model::DynamicsModel;
use crate::error::{self, Result};
use crate::nn::{ForwardCache, Gradients, Matrix};

/// A contiguous piece of one episode: `s_t`, actions `a_t..a_{t+H-1}` and the
/// observed states `s_{t+1}..s_{t+H}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: Vec<f64>,
    pub actions: Vec<Vec<f64>>,
    pub next_states: Vec<Vec<f64>>,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.actions.len().min(self.next_states.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Observed delta `s_{t+i} - s_{t+i-1}` for `i` in `1..=len`.
    fn true_delta(&self, i: usize) -> Vec<f64> {
        let prev = if i == 1 { &self.start } else { &self.next_states[i - 2] };
        self.next_states[i - 1].iter().zip(prev).map(|(a, b)| a - b).collect()
    }
}

/// Errors with a smaller norm get a zero subgradient.
const NORM_EPS: f64 = 1e-12;

/// Multi-step prediction loss on one segment:
/// `(1/H) Σᵢ ‖(ŝ_{t+i} - ŝ_{t+i-1}) - (s_{t+i} - s_{t+i-1})‖₂` with `ŝ_t = s_t`
/// and `ŝ_{t+i+1} = T̂(ŝ_{t+i}, a_{t+i})`; the recursion feeds predicted states.
pub fn h_step_loss(model: &DynamicsModel, segment: &Segment, horizon: usize) -> Result<f64> {
    h_step_loss_batch(model, std::slice::from_ref(segment), horizon, None)
}

/// Gradient of [`h_step_loss`] with respect to the network parameters,
/// back-propagated through the predicted-state chain.
pub fn h_step_loss_gradient(model: &DynamicsModel, segment: &Segment, horizon: usize) -> Result<Gradients> {
    let mut grads = Gradients::zeros_like(&model.net);
    h_step_loss_batch(model, std::slice::from_ref(segment), horizon, Some(&mut grads))?;
    Ok(grads)
}

/// Mean multi-step loss over `segments`; when `grads` is given, the gradient of
/// that mean is accumulated into it.
pub fn h_step_loss_batch(
    model: &DynamicsModel,
    segments: &[Segment],
    horizon: usize,
    grads: Option<&mut Gradients>,
) -> Result<f64> {
    if horizon == 0 {
        return error::argument("horizon must be at least 1");
    }
    if segments.is_empty() {
        return error::argument("no segments");
    }
    if segments.iter().any(|s| s.len() < horizon) {
        return error::argument(format!("segment shorter than horizon {horizon}"));
    }
    let (sd, ad) = (model.state_dim(), model.action_dim());
    let batch = segments.len();
    let std = model.stats.std();
    let mean = model.stats.mean().to_vec();

    let mut predicted = Matrix::from_rows(&segments.iter().map(|s| s.start.clone()).collect::<Vec<_>>())?;
    if predicted.cols() != sd {
        return error::config("segment state length does not match the model");
    }
    let mut caches: Vec<ForwardCache> = Vec::with_capacity(horizon);
    let mut errors: Vec<Matrix> = Vec::with_capacity(horizon);
    let mut norms: Vec<Vec<f64>> = Vec::with_capacity(horizon);
    let mut loss = 0.0;
    for i in 1..=horizon {
        let mut x = Matrix::zeros(batch, sd + ad);
        for (b, seg) in segments.iter().enumerate() {
            let a = &seg.actions[i - 1];
            if a.len() != ad {
                return error::config("segment action length does not match the model");
            }
            let row = x.row_mut(b);
            row[..sd].copy_from_slice(predicted.row(b));
            row[sd..].copy_from_slice(a);
        }
        let cache = model.net.forward_cached(x)?;
        let y = cache.output();
        let mut err = Matrix::zeros(batch, sd);
        let mut step_norms = Vec::with_capacity(batch);
        for (b, seg) in segments.iter().enumerate() {
            let truth = seg.true_delta(i);
            let mut sq = 0.0;
            for k in 0..sd {
                let d_hat = y.get(b, k) * std[k] + mean[k];
                predicted.row_mut(b)[k] += d_hat;
                let e = d_hat - truth[k];
                err.set(b, k, e);
                sq += e * e;
            }
            let n = sq.sqrt();
            loss += n;
            step_norms.push(n);
        }
        caches.push(cache);
        errors.push(err);
        norms.push(step_norms);
    }
    let scale = 1.0 / (horizon as f64 * batch as f64);
    loss *= scale;

    if let Some(grads) = grads {
        // Adjoint of the predicted state ŝ_{t+i}; zero at the end of the chain.
        let mut state_adj = Matrix::zeros(batch, sd);
        for i in (0..horizon).rev() {
            let mut dy = Matrix::zeros(batch, sd);
            for b in 0..batch {
                let n = norms[i][b];
                for k in 0..sd {
                    let d_err = if n > NORM_EPS { errors[i].get(b, k) * scale / n } else { 0.0 };
                    dy.set(b, k, (d_err + state_adj.get(b, k)) * std[k]);
                }
            }
            let dx = model.net.backward(&caches[i], &dy, grads)?;
            for b in 0..batch {
                for k in 0..sd {
                    let v = state_adj.get(b, k) + dx.get(b, k);
                    state_adj.set(b, k, v);
                }
            }
        }
    }
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::NormStats;
    use crate::envs::{Environment, LinearSystem};
    use crate::nn::{Activation, Mlp};
    use crate::rng::SeedTree;

    /// A dynamics model whose single linear layer reproduces `LinearSystem` exactly.
    fn oracle_linear_model() -> DynamicsModel {
        let env = LinearSystem::default();
        // delta = (A - I) s + B a
        let w = vec![
            env.a[0][0] - 1.0,
            env.a[0][1],
            env.b[0],
            env.a[1][0],
            env.a[1][1] - 1.0,
            env.b[1],
        ];
        let mut params = w;
        params.extend([0.0, 0.0]);
        let net = Mlp::from_params(&[3, 2], &[Activation::Identity], params).unwrap();
        DynamicsModel::from_parts(net, NormStats::new(2), 2, 1).unwrap()
    }

    fn linear_segment(len: usize) -> Segment {
        let env = LinearSystem::default();
        let mut s = vec![0.8, -0.4];
        let start = s.clone();
        let mut actions = Vec::new();
        let mut next_states = Vec::new();
        for t in 0..len {
            let a = vec![(t as f64 * 0.7).sin()];
            s = env.step(&s, &a).unwrap().next_state;
            actions.push(a);
            next_states.push(s.clone());
        }
        Segment { start, actions, next_states }
    }

    #[test]
    fn perfect_model_has_zero_loss_and_gradient() {
        let m = oracle_linear_model();
        let seg = linear_segment(4);
        for h in [1, 2, 4] {
            assert!(h_step_loss(&m, &seg, h).unwrap() < 1e-15);
            assert_eq!(h_step_loss_gradient(&m, &seg, h).unwrap().max_abs(), 0.0);
        }
    }

    #[test]
    fn short_segment_is_argument_error() {
        let m = oracle_linear_model();
        assert!(matches!(h_step_loss(&m, &linear_segment(2), 4), Err(crate::Error::Argument(_))));
        assert!(matches!(h_step_loss(&m, &linear_segment(2), 0), Err(crate::Error::Argument(_))));
    }

    #[test]
    fn one_step_loss_is_delta_error_norm() {
        let mut rng = SeedTree::new(12).rng();
        let m = DynamicsModel::new(2, 1, &[5], &mut rng).unwrap();
        let seg = linear_segment(1);
        let pred = m.predict_next_state(&seg.start, &seg.actions[0]).unwrap();
        let err: f64 = (0..2)
            .map(|k| ((pred[k] - seg.start[k]) - (seg.next_states[0][k] - seg.start[k])).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!((h_step_loss(&m, &seg, 1).unwrap() - err).abs() < 1e-14);
    }
}
