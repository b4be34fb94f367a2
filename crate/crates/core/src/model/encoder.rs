use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::layers::{relu, relu_back, Dense, Params};
use crate::pointcloud::PointCloud;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderDims {
    /// Per-point feature width; the regional features have this width too.
    pub point: usize,
    pub global_hidden: usize,
    pub global: usize,
    /// Inputs are mapped to (p − center)·scale before the first layer.
    pub center: f64,
    pub scale: f64,
}

impl Default for EncoderDims {
    fn default() -> Self {
        EncoderDims { point: 64, global_hidden: 128, global: 1024, center: 0.0375, scale: 1.0 / 0.0375 }
    }
}

impl EncoderDims {
    pub fn fused(&self) -> usize {
        self.point + self.global
    }
}

/// Shared (siamese) point-cloud encoder: a per-point MLP 3→P→P, a P×P feature
/// transform producing the regional features, and a per-point MLP P→G₁→G
/// max-pooled into the global feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub dims: EncoderDims,
    pub mlp1: Dense,
    pub mlp2: Dense,
    pub transform: Array2<f64>,
    pub global1: Dense,
    pub global2: Dense,
}

/// Regional rows (N×P) and the pooled global vector (G). The fused N×(P+G)
/// embedding is `[regional | 1·globalᵀ]`; it is never materialized.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub regional: Array2<f64>,
    pub global: Array1<f64>,
}

impl Embedding {
    pub fn fused(&self) -> Array2<f64> {
        let n = self.regional.nrows();
        let g = self.global.len();
        let mut f = Array2::zeros((n, self.regional.ncols() + g));
        f.slice_mut(ndarray::s![.., ..self.regional.ncols()]).assign(&self.regional);
        for mut row in f.slice_mut(ndarray::s![.., self.regional.ncols()..]).rows_mut() {
            row.assign(&self.global);
        }
        f
    }
}

pub(crate) struct EncoderCache {
    x: Array2<f64>,
    z1: Array2<f64>,
    h1: Array2<f64>,
    z2: Array2<f64>,
    h2: Array2<f64>,
    regional: Array2<f64>,
    z3: Array2<f64>,
    h3: Array2<f64>,
    argmax: Vec<usize>,
}

impl EncoderParams {
    pub fn init(dims: EncoderDims, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let p = dims.point;
        let mut transform = Array2::eye(p);
        transform += &super::layers::gaussian(p, p, 0.1 / (p as f64).sqrt(), &mut rng);
        EncoderParams {
            dims,
            mlp1: Dense::init(3, p, 2.0, &mut rng),
            mlp2: Dense::init(p, p, 2.0, &mut rng),
            transform,
            global1: Dense::init(p, dims.global_hidden, 2.0, &mut rng),
            global2: Dense::init(dims.global_hidden, dims.global, 1.0, &mut rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.scale(0.0);
        z
    }

    pub(crate) fn input(&self, cloud: &PointCloud) -> Array2<f64> {
        let (c, s) = (self.dims.center, self.dims.scale);
        Array2::from_shape_fn((cloud.len(), 3), |(i, d)| (cloud.points()[i].to_array()[d] - c) * s)
    }

    pub fn encode(&self, cloud: &PointCloud) -> Embedding {
        let (e, _) = self.forward(cloud);
        e
    }

    pub(crate) fn forward(&self, cloud: &PointCloud) -> (Embedding, EncoderCache) {
        assert!(!cloud.is_empty(), "cannot encode an empty cloud");
        let x = self.input(cloud);
        let z1 = self.mlp1.forward(&x.view());
        let h1 = relu(z1.clone());
        let z2 = self.mlp2.forward(&h1.view());
        let h2 = relu(z2.clone());
        let regional = h2.dot(&self.transform);
        let z3 = self.global1.forward(&regional.view());
        let h3 = relu(z3.clone());
        let h4 = self.global2.forward(&h3.view());
        let mut argmax = vec![0usize; h4.ncols()];
        let mut global = Array1::from_elem(h4.ncols(), f64::NEG_INFINITY);
        for (r, row) in h4.rows().into_iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                if v > global[c] {
                    global[c] = v;
                    argmax[c] = r;
                }
            }
        }
        let emb = Embedding { regional: regional.clone(), global };
        let cache = EncoderCache { x, z1, h1, z2, h2, regional, z3, h3, argmax };
        (emb, cache)
    }

    /// Accumulates into `grad` the gradient for upstream `d_regional` (N×P,
    /// optional) and `d_global` (G).
    pub(crate) fn backward(
        &self,
        cache: &EncoderCache,
        d_regional: Option<&Array2<f64>>,
        d_global: &Array1<f64>,
        grad: &mut EncoderParams,
    ) {
        let n = cache.h3.nrows();
        let mut dh3 = Array2::<f64>::zeros((n, self.dims.global_hidden));
        // Max-pool routes each global gradient to a single row.
        for (c, (&r, &g)) in cache.argmax.iter().zip(d_global.iter()).enumerate() {
            if g == 0.0 {
                continue;
            }
            grad.global2.b[c] += g;
            let h3_row = cache.h3.row(r);
            let mut gw = grad.global2.w.column_mut(c);
            gw.scaled_add(g, &h3_row);
            dh3.row_mut(r).scaled_add(g, &self.global2.w.column(c));
        }
        let dz3 = relu_back(&cache.z3, dh3);
        let mut d_reg = self.global1.backward(&cache.regional.view(), &dz3, &mut grad.global1);
        if let Some(dr) = d_regional {
            d_reg += dr;
        }
        grad.transform += &cache.h2.t().dot(&d_reg);
        let dh2 = d_reg.dot(&self.transform.t());
        let dz2 = relu_back(&cache.z2, dh2);
        let dh1 = self.mlp2.backward(&cache.h1.view(), &dz2, &mut grad.mlp2);
        let dz1 = relu_back(&cache.z1, dh1);
        let _ = self.mlp1.backward(&cache.x.view(), &dz1, &mut grad.mlp1);
    }
}

impl Params for EncoderParams {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut v = self.mlp1.tensors();
        v.extend(self.mlp2.tensors());
        v.push(self.transform.as_slice().expect("standard layout"));
        v.extend(self.global1.tensors());
        v.extend(self.global2.tensors());
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.mlp1.tensors_mut();
        v.extend(self.mlp2.tensors_mut());
        v.push(self.transform.as_slice_mut().expect("standard layout"));
        v.extend(self.global1.tensors_mut());
        v.extend(self.global2.tensors_mut());
        v
    }
}

/// Global features of a state and goal side by side, the retrieval key for
/// the nearest-neighbor baselines.
pub fn pair_key(encoder: &EncoderParams, state: &PointCloud, goal: &PointCloud) -> Array1<f64> {
    let a = encoder.encode(state).global;
    let b = encoder.encode(goal).global;
    ndarray::concatenate(Axis(0), &[a.view(), b.view()]).expect("same rank")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointcloud::Point3;
    use rand::seq::SliceRandom;
    use rand::Rng as _;

    fn cloud(n: usize, seed_: u64) -> PointCloud {
        let mut rng = seed::rng(seed_);
        (0..n)
            .map(|_| {
                Point3::new(rng.random_range(0.0..0.075), rng.random_range(0.0..0.075), rng.random_range(0.0..0.03))
            })
            .collect()
    }

    #[test]
    fn fused_width_and_layout() {
        let enc = EncoderParams::init(EncoderDims::default(), 1);
        let e = enc.encode(&cloud(32, 2));
        let f = e.fused();
        assert_eq!(f.dim(), (32, 1088));
        assert_eq!(f.row(5).slice(ndarray::s![64..]), e.global.view());
        assert_eq!(f.row(5).slice(ndarray::s![..64]), e.regional.row(5));
    }

    #[test]
    fn global_is_permutation_invariant_and_duplicate_proof() {
        let enc = EncoderParams::init(EncoderDims::default(), 3);
        let c = cloud(64, 4);
        let base = enc.encode(&c);
        let mut rng = seed::rng(9);
        let mut idx: Vec<usize> = (0..64).collect();
        idx.shuffle(&mut rng);
        let perm = enc.encode(&c.select(&idx));
        assert_eq!(perm.global, base.global);
        for (new, &old) in idx.iter().enumerate() {
            assert_eq!(perm.regional.row(new), base.regional.row(old));
        }
        let doubled: PointCloud = c.points().iter().chain(c.points()).copied().collect();
        assert_eq!(enc.encode(&doubled).global, base.global);
    }
}
