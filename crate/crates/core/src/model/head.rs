use ndarray::{s, Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::encoder::Embedding;
use super::layers::{relu_back_vec, relu_vec, Dense, Params};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadDims {
    /// Attention width h.
    pub attn: usize,
    /// Down-projection width L.
    pub latent: usize,
    pub mlp: usize,
}

impl Default for HeadDims {
    fn default() -> Self {
        HeadDims { attn: 128, latent: 256, mlp: 128 }
    }
}

pub const ACTION_DIM: usize = 5;

/// Cross-attention (queries from the state, keys and values from the goal),
/// mean-pooled, projected down and mapped to a normalized 5D action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionHeadParams {
    pub dims: HeadDims,
    /// Width of the regional block at the top of each projection's input.
    pub regional: usize,
    pub query: Dense,
    pub key: Dense,
    pub value: Dense,
    pub down: Dense,
    pub mlp: Dense,
    pub out: Dense,
}

pub(crate) struct HeadCache {
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    attn: Array2<f64>,
    pooled: Array1<f64>,
    z1: Array1<f64>,
    h1: Array1<f64>,
    z2: Array1<f64>,
    h2: Array1<f64>,
}

/// Gradients reaching the two embeddings.
pub(crate) struct EmbeddingGrads {
    pub state_regional: Array2<f64>,
    pub state_global: Array1<f64>,
    pub goal_regional: Array2<f64>,
    pub goal_global: Array1<f64>,
}

/// Projection of the implicit fused matrix: R·W_r + 1·(g·W_g + b).
fn project(layer: &Dense, regional: usize, e: &Embedding) -> Array2<f64> {
    let w_r = layer.w.slice(s![..regional, ..]);
    let w_g = layer.w.slice(s![regional.., ..]);
    let shared = e.global.dot(&w_g) + &layer.b;
    e.regional.dot(&w_r) + &shared
}

fn project_back(
    layer: &Dense,
    regional: usize,
    e: &Embedding,
    dy: &Array2<f64>,
    grad: &mut Dense,
) -> (Array2<f64>, Array1<f64>) {
    let col = dy.sum_axis(Axis(0));
    {
        let mut gw_r = grad.w.slice_mut(s![..regional, ..]);
        gw_r += &e.regional.t().dot(dy);
    }
    {
        let mut gw_g = grad.w.slice_mut(s![regional.., ..]);
        for (mut row, &gi) in gw_g.rows_mut().into_iter().zip(e.global.iter()) {
            row.scaled_add(gi, &col);
        }
    }
    grad.b += &col;
    let d_reg = dy.dot(&layer.w.slice(s![..regional, ..]).t());
    let d_glob = layer.w.slice(s![regional.., ..]).dot(&col);
    (d_reg, d_glob)
}

fn softmax_rows(mut x: Array2<f64>) -> Array2<f64> {
    for mut row in x.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row /= s;
    }
    x
}

impl ActionHeadParams {
    pub fn init(dims: HeadDims, regional: usize, global: usize, seed_: u64) -> Self {
        let mut rng = seed::rng(seed_);
        let fused = regional + global;
        ActionHeadParams {
            dims,
            regional,
            query: Dense::init(fused, dims.attn, 1.0, &mut rng),
            key: Dense::init(fused, dims.attn, 1.0, &mut rng),
            value: Dense::init(fused, dims.attn, 1.0, &mut rng),
            down: Dense::init(dims.attn, dims.latent, 2.0, &mut rng),
            mlp: Dense::init(dims.latent, dims.mlp, 2.0, &mut rng),
            out: Dense::init(dims.mlp, ACTION_DIM, 1.0, &mut rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.scale(0.0);
        z
    }

    pub fn predict(&self, state: &Embedding, goal: &Embedding) -> Array1<f64> {
        self.forward(state, goal).0
    }

    pub(crate) fn forward(&self, state: &Embedding, goal: &Embedding) -> (Array1<f64>, HeadCache) {
        let r = self.regional;
        let q = project(&self.query, r, state);
        let k = project(&self.key, r, goal);
        let v = project(&self.value, r, goal);
        let scale = 1.0 / (self.dims.attn as f64).sqrt();
        let attn = softmax_rows(q.dot(&k.t()) * scale);
        let pooled = attn.mean_axis(Axis(0)).expect("non-empty").dot(&v);
        let z1 = self.down.forward_vec(&pooled.view());
        let h1 = relu_vec(z1.clone());
        let z2 = self.mlp.forward_vec(&h1.view());
        let h2 = relu_vec(z2.clone());
        let y = self.out.forward_vec(&h2.view());
        (y, HeadCache { q, k, v, attn, pooled, z1, h1, z2, h2 })
    }

    pub(crate) fn backward(
        &self,
        state: &Embedding,
        goal: &Embedding,
        cache: &HeadCache,
        dy: &Array1<f64>,
        grad: &mut ActionHeadParams,
    ) -> EmbeddingGrads {
        let dh2 = self.out.backward_vec(&cache.h2.view(), dy, &mut grad.out);
        let dz2 = relu_back_vec(&cache.z2, dh2);
        let dh1 = self.mlp.backward_vec(&cache.h1.view(), &dz2, &mut grad.mlp);
        let dz1 = relu_back_vec(&cache.z1, dh1);
        let dpooled = self.down.backward_vec(&cache.pooled.view(), &dz1, &mut grad.down);

        let n_s = cache.attn.nrows();
        // pooled = mean_rows(A·V): every row of A·V receives dpooled / n_s.
        let row_grad = &dpooled / n_s as f64;
        let mut d_out = Array2::zeros((n_s, self.dims.attn));
        for mut row in d_out.rows_mut() {
            row.assign(&row_grad);
        }
        let d_attn = d_out.dot(&cache.v.t());
        let dv = cache.attn.t().dot(&d_out);
        let dot = (&d_attn * &cache.attn).sum_axis(Axis(1));
        let mut d_scores = d_attn;
        d_scores -= &dot.insert_axis(Axis(1));
        d_scores *= &cache.attn;
        let scale = 1.0 / (self.dims.attn as f64).sqrt();
        d_scores *= scale;
        let dq = d_scores.dot(&cache.k);
        let dk = d_scores.t().dot(&cache.q);

        let r = self.regional;
        let (s_reg, s_glob) = project_back(&self.query, r, state, &dq, &mut grad.query);
        let (g_reg_k, g_glob_k) = project_back(&self.key, r, goal, &dk, &mut grad.key);
        let (g_reg_v, g_glob_v) = project_back(&self.value, r, goal, &dv, &mut grad.value);
        EmbeddingGrads {
            state_regional: s_reg,
            state_global: s_glob,
            goal_regional: g_reg_k + g_reg_v,
            goal_global: g_glob_k + g_glob_v,
        }
    }

    /// Zeroes the regional block of every attention projection, so the head
    /// sees only the pooled global features.
    pub fn ablate_regional(&mut self) {
        let r = self.regional;
        for layer in [&mut self.query, &mut self.key, &mut self.value] {
            layer.w.slice_mut(s![..r, ..]).fill(0.0);
        }
    }
}

impl Params for ActionHeadParams {
    fn tensors(&self) -> Vec<&[f64]> {
        [&self.query, &self.key, &self.value, &self.down, &self.mlp, &self.out]
            .into_iter()
            .flat_map(|d| d.tensors())
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        [&mut self.query, &mut self.key, &mut self.value, &mut self.down, &mut self.mlp, &mut self.out]
            .into_iter()
            .flat_map(|d| d.tensors_mut())
            .collect()
    }
}

/// Scalar regression on [g_state, g_goal]; used only during pre-training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainHead {
    pub hidden: Dense,
    pub out: Dense,
}

pub(crate) struct PretrainCache {
    input: Array1<f64>,
    z: Array1<f64>,
    h: Array1<f64>,
}

impl PretrainHead {
    pub fn init(global: usize, hidden: usize, seed_: u64) -> Self {
        let mut rng = seed::rng(seed_);
        PretrainHead {
            hidden: Dense::init(2 * global, hidden, 2.0, &mut rng),
            out: Dense::init(hidden, 1, 1.0, &mut rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.scale(0.0);
        z
    }

    pub(crate) fn forward(&self, gs: &Array1<f64>, gg: &Array1<f64>) -> (f64, PretrainCache) {
        let input = ndarray::concatenate(Axis(0), &[gs.view(), gg.view()]).expect("same rank");
        let z = self.hidden.forward_vec(&input.view());
        let h = relu_vec(z.clone());
        let y = self.out.forward_vec(&h.view())[0];
        (y, PretrainCache { input, z, h })
    }

    /// Returns gradients for the state and goal global vectors.
    pub(crate) fn backward(
        &self,
        cache: &PretrainCache,
        dy: f64,
        grad: &mut PretrainHead,
    ) -> (Array1<f64>, Array1<f64>) {
        let dh = self.out.backward_vec(&cache.h.view(), &Array1::from_elem(1, dy), &mut grad.out);
        let dz = relu_back_vec(&cache.z, dh);
        let din = self.hidden.backward_vec(&cache.input.view(), &dz, &mut grad.hidden);
        let g = din.len() / 2;
        (din.slice(s![..g]).to_owned(), din.slice(s![g..]).to_owned())
    }
}

impl Params for PretrainHead {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut v = self.hidden.tensors();
        v.extend(self.out.tensors());
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.hidden.tensors_mut();
        v.extend(self.out.tensors_mut());
        v
    }
}
