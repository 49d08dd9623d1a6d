use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::model::DynamicsModel;
use super::stats::NormStats;
use crate::error::{self, Result};
use crate::nn::Matrix;
use crate::rng::Rng;

/// Anything that can advance a batch of states, possibly stochastically.
pub trait TransitionModel: Sync {
    fn state_dim(&self) -> usize;

    /// Next states for each `(state, action)` row.
    fn predict_batch_rng(&self, states: &Matrix, actions: &Matrix, rng: &mut Rng) -> Result<Matrix>;
}

impl TransitionModel for DynamicsModel {
    fn state_dim(&self) -> usize {
        DynamicsModel::state_dim(self)
    }

    fn predict_batch_rng(&self, states: &Matrix, actions: &Matrix, _rng: &mut Rng) -> Result<Matrix> {
        self.predict_batch(states, actions)
    }
}

/// Ordered collection of client dynamics models plus server-side statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    members: Vec<DynamicsModel>,
    server_stats: NormStats,
}

impl EnsembleModel {
    /// Builds an ensemble; `server_stats` is the count-weighted pooling of the
    /// members' statistics.
    pub fn new(members: Vec<DynamicsModel>) -> Result<Self> {
        let first = match members.first() {
            Some(m) => m,
            None => return error::config("an ensemble needs at least one member"),
        };
        if members.iter().any(|m| !m.same_shape(first)) {
            return error::config("ensemble members must share one shape");
        }
        let stats: Vec<NormStats> = members.iter().map(|m| m.stats.clone()).collect();
        let server_stats = NormStats::pooled(&stats)?;
        Ok(Self { members, server_stats })
    }

    pub fn members(&self) -> &[DynamicsModel] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn server_stats(&self) -> &NormStats {
        &self.server_stats
    }

    /// Uniformly picks one member and returns its prediction.
    pub fn ensemble_predict(&self, state: &[f64], action: &[f64], rng: &mut Rng) -> Result<Vec<f64>> {
        let k = rng.random_range(0..self.members.len());
        self.members[k].predict_next_state(state, action)
    }

    /// Arithmetic mean of all member predictions.
    pub fn ensemble_mean_predict(&self, state: &[f64], action: &[f64]) -> Result<Vec<f64>> {
        let s = Matrix::from_vec(1, state.len(), state.to_vec())?;
        let a = Matrix::from_vec(1, action.len(), action.to_vec())?;
        Ok(self.mean_predict_batch(&s, &a)?.into_data())
    }

    pub fn mean_predict_batch(&self, states: &Matrix, actions: &Matrix) -> Result<Matrix> {
        let mut acc = Matrix::zeros(states.rows(), states.cols());
        for m in &self.members {
            let p = m.predict_batch(states, actions)?;
            for (a, v) in acc.data_mut().iter_mut().zip(p.data()) {
                *a += v;
            }
        }
        let k = self.members.len() as f64;
        acc.data_mut().iter_mut().for_each(|v| *v /= k);
        Ok(acc)
    }
}

impl TransitionModel for EnsembleModel {
    fn state_dim(&self) -> usize {
        self.members[0].state_dim()
    }

    /// One uniformly drawn member per row; rows sharing a member are batched.
    fn predict_batch_rng(&self, states: &Matrix, actions: &Matrix, rng: &mut Rng) -> Result<Matrix> {
        let n = states.rows();
        let choice: Vec<usize> = (0..n).map(|_| rng.random_range(0..self.members.len())).collect();
        let mut out = Matrix::zeros(n, states.cols());
        for (k, member) in self.members.iter().enumerate() {
            let rows: Vec<usize> = (0..n).filter(|&r| choice[r] == k).collect();
            if rows.is_empty() {
                continue;
            }
            let s = Matrix::from_rows(&rows.iter().map(|&r| states.row(r)).collect::<Vec<_>>())?;
            let a = Matrix::from_rows(&rows.iter().map(|&r| actions.row(r)).collect::<Vec<_>>())?;
            let p = member.predict_batch(&s, &a)?;
            for (i, &r) in rows.iter().enumerate() {
                out.row_mut(r).copy_from_slice(p.row(i));
            }
        }
        Ok(out)
    }
}
