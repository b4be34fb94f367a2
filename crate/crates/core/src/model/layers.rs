use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::seed::Rng;

/// Affine layer y = x·W + b with W stored fan_in × fan_out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    /// Gaussian weights with variance `gain / fan_in`, zero bias.
    pub fn init(fan_in: usize, fan_out: usize, gain: f64, rng: &mut Rng) -> Self {
        let std = (gain / fan_in.max(1) as f64).sqrt();
        Dense { w: gaussian(fan_in, fan_out, std, rng), b: Array1::zeros(fan_out) }
    }

    pub fn zeros_like(&self) -> Self {
        Dense { w: Array2::zeros(self.w.raw_dim()), b: Array1::zeros(self.b.raw_dim()) }
    }

    pub fn forward(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.w) + &self.b
    }

    pub fn forward_vec(&self, x: &ArrayView1<f64>) -> Array1<f64> {
        x.dot(&self.w) + &self.b
    }

    /// Accumulates parameter gradients for `dy` and returns dL/dx.
    pub fn backward(&self, x: &ArrayView2<f64>, dy: &Array2<f64>, grad: &mut Dense) -> Array2<f64> {
        grad.w += &x.t().dot(dy);
        grad.b += &dy.sum_axis(Axis(0));
        dy.dot(&self.w.t())
    }

    pub fn backward_vec(&self, x: &ArrayView1<f64>, dy: &Array1<f64>, grad: &mut Dense) -> Array1<f64> {
        outer_add(&mut grad.w, x, &dy.view());
        grad.b += dy;
        self.w.dot(dy)
    }
}

pub fn gaussian(rows: usize, cols: usize, std: f64, rng: &mut Rng) -> Array2<f64> {
    let normal = Normal::new(0.0, std).expect("finite std");
    Array2::from_shape_simple_fn((rows, cols), || normal.sample(rng))
}

/// m += a ⊗ b
pub fn outer_add(m: &mut Array2<f64>, a: &ArrayView1<f64>, b: &ArrayView1<f64>) {
    for (mut row, &ai) in m.rows_mut().into_iter().zip(a.iter()) {
        if ai != 0.0 {
            row.scaled_add(ai, b);
        }
    }
}

pub fn relu(mut x: Array2<f64>) -> Array2<f64> {
    x.mapv_inplace(|v| v.max(0.0));
    x
}

pub fn relu_vec(mut x: Array1<f64>) -> Array1<f64> {
    x.mapv_inplace(|v| v.max(0.0));
    x
}

/// dy masked by the sign of the pre-activation.
pub fn relu_back(pre: &Array2<f64>, mut dy: Array2<f64>) -> Array2<f64> {
    dy.zip_mut_with(pre, |d, &p| {
        if p <= 0.0 {
            *d = 0.0
        }
    });
    dy
}

pub fn relu_back_vec(pre: &Array1<f64>, mut dy: Array1<f64>) -> Array1<f64> {
    dy.zip_mut_with(pre, |d, &p| {
        if p <= 0.0 {
            *d = 0.0
        }
    });
    dy
}

/// Flat views over every trainable tensor, in a fixed order.
pub trait Params {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= s);
        }
    }

    fn add_from(&mut self, other: &Self) {
        for (t, o) in self.tensors_mut().into_iter().zip(other.tensors()) {
            t.iter_mut().zip(o).for_each(|(a, b)| *a += b);
        }
    }

    fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    fn count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

impl Params for Dense {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![self.w.as_slice().expect("standard layout"), self.b.as_slice().expect("standard layout")]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.w.as_slice_mut().expect("standard layout"), self.b.as_slice_mut().expect("standard layout")]
    }
}

/// SGD with classical momentum: v ← μv + g, θ ← θ − ηv.
#[derive(Debug, Clone)]
pub struct Sgd<P> {
    pub lr: f64,
    pub momentum: f64,
    velocity: P,
}

impl<P: Params + Clone> Sgd<P> {
    pub fn new(lr: f64, momentum: f64, like: &P) -> Self {
        let mut velocity = like.clone();
        velocity.scale(0.0);
        Sgd { lr, momentum, velocity }
    }

    pub fn step(&mut self, params: &mut P, grad: &P) {
        let (lr, mu) = (self.lr, self.momentum);
        for ((p, v), g) in params.tensors_mut().into_iter().zip(self.velocity.tensors_mut()).zip(grad.tensors()) {
            for ((p, v), g) in p.iter_mut().zip(v.iter_mut()).zip(g) {
                *v = mu * *v + g;
                *p -= lr * *v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn dense_backward_matches_hand_values() {
        let layer = Dense { w: array![[1.0, 2.0], [3.0, 4.0]], b: array![0.5, -0.5] };
        let x = array![[1.0, -1.0]];
        assert_eq!(layer.forward(&x.view()), array![[-1.5, -2.5]]);
        let mut g = layer.zeros_like();
        let dx = layer.backward(&x.view(), &array![[1.0, 0.0]], &mut g);
        assert_eq!(dx, array![[1.0, 3.0]]);
        assert_eq!(g.w, array![[1.0, 0.0], [-1.0, 0.0]]);
        assert_eq!(g.b, array![1.0, 0.0]);
    }

    #[test]
    fn momentum_step() {
        let mut p = Dense { w: array![[1.0]], b: array![0.0] };
        let g = Dense { w: array![[1.0]], b: array![2.0] };
        let mut opt = Sgd::new(0.1, 0.9, &p);
        opt.step(&mut p, &g);
        opt.step(&mut p, &g);
        // v1 = 1, v2 = 1.9 → w = 1 − 0.1·2.9
        assert!((p.w[[0, 0]] - 0.71).abs() < 1e-15);
        assert!((p.b[0] + 0.58).abs() < 1e-15);
    }
}
