use ndarray::Array1;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::data::{ActionTuple, PretrainPair};
use super::encoder::{Embedding, EncoderDims, EncoderParams};
use super::head::{ActionHeadParams, HeadDims, PretrainHead, ACTION_DIM};
use super::layers::{Params, Sgd};
use super::ActionModel;
use crate::error::{Error, Result};
use crate::pointcloud::PointCloud;
use crate::seed;
use crate::sim::ActionBounds;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyper {
    pub lr: f64,
    pub momentum: f64,
    pub batch: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper { lr: 1e-3, momentum: 0.9, batch: 32, epochs: 10, seed: 0 }
    }
}

impl Hyper {
    fn validate(&self) -> Result<()> {
        if self.batch == 0 || !(self.lr > 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("hyper-parameters need batch ≥ 1, lr > 0, momentum in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Pre-trained encoder, never updated.
    Frozen,
    /// Pre-trained encoder, trained together with the head.
    Unfrozen,
    /// Randomly initialized encoder trained together with the head.
    EndToEnd,
}

/// Mini-batches over a seeded shuffle of `0..n`.
fn batches(n: usize, batch: usize, rng: &mut seed::Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.chunks(batch).map(<[usize]>::to_vec).collect()
}

/// Squared error of the scalar head on one pair, in target-scale units.
/// Gradients are accumulated into `grads` when given.
pub fn pretrain_sample(
    enc: &EncoderParams,
    head: &PretrainHead,
    state: &PointCloud,
    next: &PointCloud,
    target: f64,
    grads: Option<(&mut EncoderParams, &mut PretrainHead)>,
) -> f64 {
    let (es, cs) = enc.forward(state);
    let (eg, cg) = enc.forward(next);
    let (y, hc) = head.forward(&es.global, &eg.global);
    let r = y - target;
    if let Some((ge, gh)) = grads {
        let (dgs, dgg) = head.backward(&hc, 2.0 * r, gh);
        enc.backward(&cs, None, &dgs, ge);
        enc.backward(&cg, None, &dgg, ge);
    }
    r * r
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PretrainReport {
    /// Targets are divided by this before regression.
    pub target_scale: f64,
    pub train_pairs: usize,
    pub val_pairs: usize,
    pub initial_val_loss: f64,
    pub final_val_loss: f64,
    pub epoch_train_loss: Vec<f64>,
}

/// A pre-trained encoder together with the scalar head it was fitted with.
#[derive(Debug, Clone)]
pub struct Pretrained {
    pub encoder: EncoderParams,
    pub head: PretrainHead,
    pub report: PretrainReport,
}

impl Pretrained {
    /// Predicted mixed distance for a pair, in target units.
    pub fn predict(&self, state: &PointCloud, next: &PointCloud) -> f64 {
        let e = &self.encoder;
        let (y, _) = self.head.forward(&e.encode(state).global, &e.encode(next).global);
        y * self.report.target_scale
    }
}

/// Fits encoder and scalar head to the pair distances.
/// A seeded `val_fraction` of the pairs is held out for the report; with a
/// single pair the training pair doubles as validation.
pub fn pretrain_encoder(
    pairs: &[PretrainPair],
    dims: EncoderDims,
    hidden: usize,
    hyper: &Hyper,
    val_fraction: f64,
) -> Result<Pretrained> {
    hyper.validate()?;
    if pairs.is_empty() {
        return Err(Error::invalid("pre-training needs at least one pair"));
    }
    if !(0.0..1.0).contains(&val_fraction) {
        return Err(Error::invalid("validation fraction must be in [0, 1)"));
    }
    let mut rng = seed::substream(hyper.seed, "pretrain-split");
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(&mut rng);
    let n_val =
        if pairs.len() < 2 { 0 } else { ((pairs.len() as f64 * val_fraction).round() as usize).min(pairs.len() - 1) };
    let (held_out, train_idx) = order.split_at(n_val);
    let val_idx = if held_out.is_empty() { train_idx } else { held_out };

    let mean = train_idx.iter().map(|&i| pairs[i].target).sum::<f64>() / train_idx.len() as f64;
    let scale = if mean > 0.0 && mean.is_finite() { mean } else { 1.0 };

    let mut enc = EncoderParams::init(dims, seed::derive(hyper.seed, "encoder"));
    let mut head = PretrainHead::init(dims.global, hidden, seed::derive(hyper.seed, "pretrain-head"));
    let mut opt_e = Sgd::new(hyper.lr, hyper.momentum, &enc);
    let mut opt_h = Sgd::new(hyper.lr, hyper.momentum, &head);

    let val_loss = |enc: &EncoderParams, head: &PretrainHead| {
        val_idx
            .iter()
            .map(|&i| pretrain_sample(enc, head, &pairs[i].state, &pairs[i].next, pairs[i].target / scale, None))
            .sum::<f64>()
            / val_idx.len() as f64
    };
    let initial_val_loss = val_loss(&enc, &head);
    let mut epoch_train_loss = Vec::with_capacity(hyper.epochs);
    let mut shuffle = seed::substream(hyper.seed, "pretrain-batches");
    for epoch in 0..hyper.epochs {
        let mut total = 0.0;
        for b in batches(train_idx.len(), hyper.batch, &mut shuffle) {
            let mut ge = enc.zeros_like();
            let mut gh = head.zeros_like();
            for &k in &b {
                let p = &pairs[train_idx[k]];
                total += pretrain_sample(&enc, &head, &p.state, &p.next, p.target / scale, Some((&mut ge, &mut gh)));
            }
            let inv = 1.0 / b.len() as f64;
            ge.scale(inv);
            gh.scale(inv);
            opt_e.step(&mut enc, &ge);
            opt_h.step(&mut head, &gh);
        }
        let mean_loss = total / train_idx.len() as f64;
        log::info!("pre-train epoch {epoch}: train loss {mean_loss:.6}");
        epoch_train_loss.push(mean_loss);
        if !enc.is_finite() || !head.is_finite() {
            return Err(Error::InvalidState("pre-training diverged".into()));
        }
    }
    let report = PretrainReport {
        target_scale: scale,
        train_pairs: train_idx.len(),
        val_pairs: held_out.len(),
        initial_val_loss,
        final_val_loss: val_loss(&enc, &head),
        epoch_train_loss,
    };
    Ok(Pretrained { encoder: enc, head, report })
}

/// Mean squared error over the 5 normalized action dims for one tuple.
fn head_sample(
    head: &ActionHeadParams,
    es: &Embedding,
    eg: &Embedding,
    target: &[f64; ACTION_DIM],
    grad: Option<&mut ActionHeadParams>,
) -> (f64, Option<super::head::EmbeddingGrads>) {
    let (y, cache) = head.forward(es, eg);
    let err: Array1<f64> = &y - &Array1::from(target.to_vec());
    let loss = err.dot(&err) / ACTION_DIM as f64;
    let eg_grads = grad.map(|g| head.backward(es, eg, &cache, &(&err * (2.0 / ACTION_DIM as f64)), g));
    (loss, eg_grads)
}

/// Mean squared error over the five normalized action coordinates for one
/// tuple. Gradients are accumulated into `grads` when given.
pub fn action_sample(
    enc: &EncoderParams,
    head: &ActionHeadParams,
    state: &PointCloud,
    next: &PointCloud,
    target: &[f64; ACTION_DIM],
    grads: Option<(&mut EncoderParams, &mut ActionHeadParams)>,
) -> f64 {
    let (es, cs) = enc.forward(state);
    let (eg, cg) = enc.forward(next);
    match grads {
        None => head_sample(head, &es, &eg, target, None).0,
        Some((ge, gh)) => {
            let (loss, d) = head_sample(head, &es, &eg, target, Some(gh));
            let d = d.expect("gradients requested");
            enc.backward(&cs, Some(&d.state_regional), &d.state_global, ge);
            enc.backward(&cg, Some(&d.goal_regional), &d.goal_global, ge);
            loss
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub mode: Mode,
    pub tuples: usize,
    pub epoch_loss: Vec<f64>,
    pub final_train_mse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelDims {
    pub encoder: EncoderDims,
    pub head: HeadDims,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims { encoder: EncoderDims::default(), head: HeadDims::default() }
    }
}

/// Trains the action head (and, unless frozen, the encoder) to regress
/// normalized grasp actions from (state, next state) cluster pairs.
///
/// Frozen and unfrozen need a pre-trained encoder; end-to-end must not get one.
pub fn train_action_head(
    tuples: &[ActionTuple],
    pretrained: Option<&EncoderParams>,
    mode: Mode,
    dims: ModelDims,
    bounds: ActionBounds,
    hyper: &Hyper,
) -> Result<(ActionModel, TrainReport)> {
    hyper.validate()?;
    if tuples.is_empty() {
        return Err(Error::invalid("action training needs at least one tuple"));
    }
    let mut enc = match (mode, pretrained) {
        (Mode::EndToEnd, Some(_)) => {
            return Err(Error::invalid("end-to-end training starts from a random encoder; got pre-trained weights"))
        }
        (Mode::EndToEnd, None) => EncoderParams::init(dims.encoder, seed::derive(hyper.seed, "encoder")),
        (_, None) => return Err(Error::invalid(format!("{mode:?} training needs a pre-trained encoder"))),
        (_, Some(e)) => e.clone(),
    };
    let ed = enc.dims;
    let mut head = ActionHeadParams::init(dims.head, ed.point, ed.global, seed::derive(hyper.seed, "action-head"));
    let targets: Vec<[f64; ACTION_DIM]> = tuples.iter().map(|t| bounds.normalize(&t.action)).collect();
    let mut opt_h = Sgd::new(hyper.lr, hyper.momentum, &head);
    let mut opt_e = Sgd::new(hyper.lr, hyper.momentum, &enc);
    let frozen: Option<Vec<(Embedding, Embedding)>> =
        (mode == Mode::Frozen).then(|| tuples.iter().map(|t| (enc.encode(&t.state), enc.encode(&t.next))).collect());

    let mut shuffle = seed::substream(hyper.seed, "action-batches");
    let mut epoch_loss = Vec::with_capacity(hyper.epochs);
    for epoch in 0..hyper.epochs {
        let mut total = 0.0;
        for b in batches(tuples.len(), hyper.batch, &mut shuffle) {
            let mut gh = head.zeros_like();
            let mut ge = (mode != Mode::Frozen).then(|| enc.zeros_like());
            for &k in &b {
                total += match (&frozen, ge.as_mut()) {
                    (Some(emb), _) => head_sample(&head, &emb[k].0, &emb[k].1, &targets[k], Some(&mut gh)).0,
                    (None, Some(ge)) => {
                        action_sample(&enc, &head, &tuples[k].state, &tuples[k].next, &targets[k], Some((ge, &mut gh)))
                    }
                    (None, None) => unreachable!("trainable encoder has a gradient buffer"),
                };
            }
            let inv = 1.0 / b.len() as f64;
            gh.scale(inv);
            opt_h.step(&mut head, &gh);
            if let Some(mut ge) = ge {
                ge.scale(inv);
                opt_e.step(&mut enc, &ge);
            }
        }
        let mean = total / tuples.len() as f64;
        log::info!("{mode:?} epoch {epoch}: train mse {mean:.6}");
        epoch_loss.push(mean);
        if !head.is_finite() {
            return Err(Error::InvalidState("action training diverged".into()));
        }
    }
    let model = ActionModel { encoder: enc, head, bounds };
    let final_train_mse = tuples
        .iter()
        .zip(&targets)
        .map(|(t, a)| action_sample(&model.encoder, &model.head, &t.state, &t.next, a, None))
        .sum::<f64>()
        / tuples.len() as f64;
    Ok((model, TrainReport { mode, tuples: tuples.len(), epoch_loss, final_train_mse }))
}
