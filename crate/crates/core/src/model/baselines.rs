use ndarray::Array1;
use rand::Rng as _;

use super::data::ActionTuple;
use super::encoder::{pair_key, EncoderParams};
use crate::error::{Error, Result};
use crate::pointcloud::PointCloud;
use crate::seed;
use crate::sim::{ActionBounds, GraspAction};

/// Training tuples keyed by their encoded (state, goal) pair, for the
/// retrieval baselines.
#[derive(Debug, Clone)]
pub struct RetrievalIndex {
    encoder: EncoderParams,
    bounds: ActionBounds,
    keys: Vec<Array1<f64>>,
    actions: Vec<[f64; 5]>,
}

impl RetrievalIndex {
    pub fn build(encoder: &EncoderParams, tuples: &[ActionTuple], bounds: ActionBounds) -> Result<Self> {
        if tuples.is_empty() {
            return Err(Error::InvalidState("retrieval over an empty training set".into()));
        }
        Ok(RetrievalIndex {
            encoder: encoder.clone(),
            bounds,
            keys: tuples.iter().map(|t| pair_key(encoder, &t.state, &t.next)).collect(),
            actions: tuples.iter().map(|t| bounds.normalize(&t.action)).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// The `k` closest keys as (distance, index), nearest first; ties keep
    /// index order.
    fn nearest(&self, state: &PointCloud, goal: &PointCloud, k: usize) -> Result<Vec<(f64, usize)>> {
        if state.is_empty() || goal.is_empty() {
            return Err(Error::invalid("retrieval needs non-empty state and goal clouds"));
        }
        let q = pair_key(&self.encoder, state, goal);
        let mut d: Vec<(f64, usize)> = self
            .keys
            .iter()
            .enumerate()
            .map(|(i, key)| {
                let diff = key - &q;
                (diff.dot(&diff).sqrt(), i)
            })
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.truncate(k);
        Ok(d)
    }

    /// Action of the single closest training pair.
    pub fn nn_greedy(&self, state: &PointCloud, goal: &PointCloud) -> Result<GraspAction> {
        let (_, i) = self.nearest(state, goal, 1)?[0];
        Ok(self.bounds.denormalize(&self.actions[i]))
    }

    /// The `k` nearest training indices with normalized exp(−distance) weights.
    pub fn vinn_weights(&self, state: &PointCloud, goal: &PointCloud, k: usize) -> Result<Vec<(usize, f64)>> {
        if k == 0 {
            return Err(Error::invalid("VINN needs k ≥ 1"));
        }
        let near = self.nearest(state, goal, k)?;
        // shifted by the nearest distance; the ratios are unchanged
        let d_min = near[0].0;
        let raw: Vec<f64> = near.iter().map(|&(d, _)| (-(d - d_min)).exp()).collect();
        let total: f64 = raw.iter().sum();
        Ok(near.iter().zip(raw).map(|(&(_, i), w)| (i, w / total)).collect())
    }

    /// Weighted average of the `k` nearest actions in normalized space.
    pub fn vinn(&self, state: &PointCloud, goal: &PointCloud, k: usize) -> Result<GraspAction> {
        let mut acc = [0.0; 5];
        for (i, w) in self.vinn_weights(state, goal, k)? {
            for (a, v) in acc.iter_mut().zip(&self.actions[i]) {
                *a += w * v;
            }
        }
        Ok(self.bounds.denormalize(&acc))
    }
}

/// Uniform draw inside the action box.
pub fn random_action(bounds: &ActionBounds, rng: &mut seed::Rng) -> GraspAction {
    GraspAction::from_array(std::array::from_fn(|d| {
        if d == 3 {
            rng.random_range(bounds.min[d]..bounds.max[d])
        } else {
            rng.random_range(bounds.min[d]..=bounds.max[d])
        }
    }))
}
