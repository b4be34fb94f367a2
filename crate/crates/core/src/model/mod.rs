//! Siamese point-cloud encoder, cross-attention action head, their training
//! loops, and the retrieval and random baselines.

mod baselines;
mod data;
mod encoder;
mod head;
mod layers;
mod train;

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use baselines::{random_action, RetrievalIndex};
pub use data::{
    build_body, generate_synthetic_pairs, random_modification, read_dataset, read_pairs, read_tuples, seed_clouds,
    simulate_action_tuples, write_dataset, write_pairs, write_tuples, ActionTuple, DatasetRecord, PretrainPair,
    SimDatasetConfig, DEFAULT_GAMMA_MIX, TRAIN_POINTS,
};
pub use encoder::{pair_key, Embedding, EncoderDims, EncoderParams};
pub use head::{ActionHeadParams, HeadDims, PretrainHead, ACTION_DIM};
pub use layers::{Dense, Params, Sgd};
pub use train::{
    action_sample, pretrain_encoder, pretrain_sample, train_action_head, Hyper, Mode, ModelDims, PretrainReport,
    Pretrained, TrainReport,
};

use crate::error::{Error, Result};
use crate::pointcloud::PointCloud;
use crate::sim::{ActionBounds, GraspAction};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Encoder and head trained together, with the box used to normalize actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionModel {
    pub encoder: EncoderParams,
    pub head: ActionHeadParams,
    pub bounds: ActionBounds,
}

impl ActionModel {
    /// Grasp predicted to turn `state` into `goal`; always inside the bounds.
    pub fn predict_action(&self, state: &PointCloud, goal: &PointCloud) -> Result<GraspAction> {
        if state.is_empty() || goal.is_empty() {
            return Err(Error::invalid("action prediction needs non-empty state and goal clouds"));
        }
        let y = self.head.predict(&self.encoder.encode(state), &self.encoder.encode(goal));
        let n: [f64; ACTION_DIM] = std::array::from_fn(|d| y[d]);
        Ok(self.bounds.denormalize(&n))
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint<T> {
    format_version: u32,
    kind: String,
    weights: T,
}

fn save<T: Serialize>(path: &Path, kind: &str, weights: &T) -> Result<()> {
    let ck = Checkpoint { format_version: CHECKPOINT_VERSION, kind: kind.to_string(), weights };
    let text = serde_json::to_string(&ck)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn load<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ck: Checkpoint<T> =
        serde_json::from_str(&text).map_err(|e| Error::Format { what: "checkpoint", detail: e.to_string() })?;
    if ck.format_version != CHECKPOINT_VERSION || ck.kind != kind {
        return Err(Error::Format {
            what: "checkpoint",
            detail: format!("expected {kind} v{CHECKPOINT_VERSION}, found {} v{}", ck.kind, ck.format_version),
        });
    }
    Ok(ck.weights)
}

pub fn save_encoder(path: &Path, encoder: &EncoderParams) -> Result<()> {
    save(path, "encoder", encoder)
}

pub fn load_encoder(path: &Path) -> Result<EncoderParams> {
    load(path, "encoder")
}

pub fn save_model(path: &Path, model: &ActionModel) -> Result<()> {
    save(path, "action-model", model)
}

pub fn load_model(path: &Path) -> Result<ActionModel> {
    load(path, "action-model")
}
