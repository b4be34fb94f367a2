use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::DistanceReport;
use crate::model::{
    generate_synthetic_pairs, pretrain_encoder, random_action, read_pairs, read_tuples, seed_clouds,
    simulate_action_tuples, train_action_head, write_pairs, write_tuples, ActionModel, ActionTuple, EncoderParams,
    Hyper, Mode, ModelDims, PretrainPair, Pretrained, RetrievalIndex, SimDatasetConfig, DEFAULT_GAMMA_MIX,
};
use crate::seed;
use crate::sim::{apply_grasp, ActionBounds, ClayBody, GraspAction, SimParams};

pub const TRAIN_DIR: &str = "train";
pub const TEST_DIR: &str = "test";
pub const PAIRS_DIR: &str = "pairs";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetJob {
    pub train: usize,
    pub test: usize,
    pub pairs: usize,
    pub gamma_mix: f64,
    pub seed: u64,
    pub sim: SimDatasetConfig,
}

impl Default for DatasetJob {
    fn default() -> Self {
        DatasetJob {
            train: 200,
            test: 50,
            pairs: 4000,
            gamma_mix: DEFAULT_GAMMA_MIX,
            seed: 0,
            sim: SimDatasetConfig::default(),
        }
    }
}

/// The three datasets held in memory.
pub struct Datasets {
    pub train: Vec<ActionTuple>,
    pub test: Vec<ActionTuple>,
    pub pairs: Vec<PretrainPair>,
}

pub fn build_datasets(job: &DatasetJob) -> Result<Datasets> {
    let train = simulate_action_tuples(&job.sim, job.train, seed::derive(job.seed, "train"))?;
    let test = simulate_action_tuples(&job.sim, job.test, seed::derive(job.seed, "test"))?;
    let seeds = seed_clouds(&job.sim, seed::derive(job.seed, "seed-clouds"))?;
    let pairs = generate_synthetic_pairs(&seeds, job.pairs, job.gamma_mix, seed::derive(job.seed, "pairs"))?;
    Ok(Datasets { train, test, pairs })
}

/// Writes `train/`, `test/` and `pairs/` under `out`.
pub fn make_dataset(job: &DatasetJob, out: &Path) -> Result<Datasets> {
    let d = build_datasets(job)?;
    write_tuples(&out.join(TRAIN_DIR), &d.train, job.gamma_mix)?;
    write_tuples(&out.join(TEST_DIR), &d.test, job.gamma_mix)?;
    write_pairs(&out.join(PAIRS_DIR), &d.pairs)?;
    Ok(d)
}

pub fn load_datasets(dir: &Path) -> Result<Datasets> {
    Ok(Datasets {
        train: read_tuples(&dir.join(TRAIN_DIR))?,
        test: read_tuples(&dir.join(TEST_DIR))?,
        pairs: read_pairs(&dir.join(PAIRS_DIR))?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainJob {
    pub hyper: Hyper,
    pub dims: ModelDims,
    pub head_hidden: usize,
    pub val_fraction: f64,
}

impl Default for PretrainJob {
    fn default() -> Self {
        PretrainJob {
            hyper: Hyper { epochs: 2, ..Default::default() },
            dims: ModelDims::default(),
            head_hidden: 128,
            val_fraction: 0.1,
        }
    }
}

pub fn run_pretrain(pairs: &[PretrainPair], job: &PretrainJob) -> Result<Pretrained> {
    pretrain_encoder(pairs, job.dims.encoder, job.head_hidden, &job.hyper, job.val_fraction)
}

/// Evaluation settings: one hyper-parameter set per trained row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalJob {
    pub frozen: Hyper,
    pub unfrozen: Hyper,
    pub end_to_end: Hyper,
    pub dims: ModelDims,
    /// Share of the training tuples held out for the validation column.
    pub val_fraction: f64,
    pub vinn_k: usize,
    pub seed: u64,
    pub sim: SimParams,
    pub bounds: ActionBounds,
}

impl Default for EvalJob {
    fn default() -> Self {
        EvalJob {
            frozen: Hyper { epochs: 30, ..Default::default() },
            unfrozen: Hyper { epochs: 5, ..Default::default() },
            end_to_end: Hyper { epochs: 5, ..Default::default() },
            dims: ModelDims::default(),
            val_fraction: 0.1,
            vinn_k: 5,
            seed: 0,
            sim: SimParams::default(),
            bounds: ActionBounds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub method: String,
    pub val_mse: f64,
    pub test_mse: f64,
    pub cd: f64,
    pub emd: f64,
    pub hd: f64,
}

pub const EVAL_METHODS: [&str; 6] = ["VINN", "NN-greedy", "DM frozen", "DM unfrozen", "DM end-to-end", "Random"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalTable {
    pub rows: Vec<EvalRow>,
    pub train_tuples: usize,
    pub val_tuples: usize,
    pub test_tuples: usize,
}

impl EvalTable {
    pub fn row(&self, method: &str) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let fmt = |e: csv::Error| Error::Format { what: "csv", detail: e.to_string() };
        let mut w = csv::Writer::from_path(path).map_err(fmt)?;
        for r in &self.rows {
            w.serialize(r).map_err(fmt)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Mean over tuples of the mean squared error across the 5 normalized dims.
pub fn normalized_mse(bounds: &ActionBounds, pred: &[GraspAction], truth: &[ActionTuple]) -> f64 {
    let total: f64 = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| {
            let (a, b) = (bounds.normalize(p), bounds.normalize(&t.action));
            (0..5).map(|d| (a[d] - b[d]).powi(2)).sum::<f64>() / 5.0
        })
        .sum();
    total / truth.len() as f64
}

/// Applies predicted and true grasps to each state cluster on its own and
/// compares the results.
fn rollout_distance(sim: &SimParams, pred: &[GraspAction], truth: &[ActionTuple]) -> Result<DistanceReport> {
    let mut acc = DistanceReport { cd: 0.0, emd: 0.0, hd: 0.0 };
    for (p, t) in pred.iter().zip(truth) {
        let body = ClayBody::from_particles(t.state.points().to_vec(), sim)?;
        let got = apply_grasp(&body, p, sim).as_cloud();
        let want = apply_grasp(&body, &t.action, sim).as_cloud();
        let d = DistanceReport::compute(&got, &want)?;
        acc.cd += d.cd;
        acc.emd += d.emd;
        acc.hd += d.hd;
    }
    let n = truth.len() as f64;
    Ok(DistanceReport { cd: acc.cd / n, emd: acc.emd / n, hd: acc.hd / n })
}

/// Trains the three DM variants and scores them with the retrieval and random
/// baselines on validation and test tuples.
pub fn evaluate(
    train: &[ActionTuple],
    test: &[ActionTuple],
    encoder: &EncoderParams,
    job: &EvalJob,
) -> Result<EvalTable> {
    if train.len() < 2 || test.is_empty() {
        return Err(Error::invalid("evaluation needs at least two training tuples and one test tuple"));
    }
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(&mut seed::substream(job.seed, "eval-split"));
    let n_val = ((train.len() as f64 * job.val_fraction).round() as usize).clamp(1, train.len() - 1);
    let val: Vec<ActionTuple> = order[..n_val].iter().map(|&i| train[i].clone()).collect();
    let fit: Vec<ActionTuple> = order[n_val..].iter().map(|&i| train[i].clone()).collect();
    let b = job.bounds;

    let score = |method: &str, predict: &mut dyn FnMut(&ActionTuple) -> Result<GraspAction>| -> Result<EvalRow> {
        let pv = val.iter().map(&mut *predict).collect::<Result<Vec<_>>>()?;
        let pt = test.iter().map(&mut *predict).collect::<Result<Vec<_>>>()?;
        let d = rollout_distance(&job.sim, &pt, test)?;
        Ok(EvalRow {
            method: method.into(),
            val_mse: normalized_mse(&b, &pv, &val),
            test_mse: normalized_mse(&b, &pt, test),
            cd: d.cd,
            emd: d.emd,
            hd: d.hd,
        })
    };
    let dm_row = |method: &str, m: &ActionModel| score(method, &mut |t| m.predict_action(&t.state, &t.next));

    let index = RetrievalIndex::build(encoder, &fit, b)?;
    let vinn = score(EVAL_METHODS[0], &mut |t| index.vinn(&t.state, &t.next, job.vinn_k))?;
    let nn = score(EVAL_METHODS[1], &mut |t| index.nn_greedy(&t.state, &t.next))?;
    let train_dm = |mode: Mode, hyper: &Hyper| {
        let enc = (mode != Mode::EndToEnd).then_some(encoder);
        log::info!("training {mode:?} on {} tuples", fit.len());
        train_action_head(&fit, enc, mode, job.dims, b, hyper).map(|(m, _)| m)
    };
    let frozen = dm_row(EVAL_METHODS[2], &train_dm(Mode::Frozen, &job.frozen)?)?;
    let unfrozen = dm_row(EVAL_METHODS[3], &train_dm(Mode::Unfrozen, &job.unfrozen)?)?;
    let e2e = dm_row(EVAL_METHODS[4], &train_dm(Mode::EndToEnd, &job.end_to_end)?)?;
    let mut rng = seed::substream(job.seed, "random-baseline");
    let random = score(EVAL_METHODS[5], &mut |_| Ok(random_action(&b, &mut rng)))?;
    Ok(EvalTable {
        rows: vec![vinn, nn, frozen, unfrozen, e2e, random],
        train_tuples: fit.len(),
        val_tuples: val.len(),
        test_tuples: test.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EncoderDims, HeadDims};
    use crate::pointcloud::{Point3, PointCloud};
    use rand::Rng as _;

    fn toy_job() -> EvalJob {
        let h = Hyper { epochs: 2, batch: 4, ..Default::default() };
        EvalJob {
            frozen: h,
            unfrozen: h,
            end_to_end: h,
            dims: ModelDims {
                encoder: EncoderDims { point: 4, global_hidden: 6, global: 8, ..Default::default() },
                head: HeadDims { attn: 4, latent: 6, mlp: 4 },
            },
            ..Default::default()
        }
    }

    fn tuples(n: usize, s: u64) -> Vec<ActionTuple> {
        let mut rng = seed::rng(s);
        let b = ActionBounds::default();
        (0..n)
            .map(|_| {
                let state: PointCloud = (0..8)
                    .map(|_| {
                        Point3::new(
                            rng.random_range(0.03..0.045),
                            rng.random_range(0.03..0.045),
                            rng.random_range(0.0..0.015),
                        )
                    })
                    .collect();
                let action = random_action(&b, &mut rng);
                let next = apply_grasp(
                    &ClayBody::from_particles(state.points().to_vec(), &SimParams::default()).unwrap(),
                    &action,
                    &SimParams::default(),
                )
                .as_cloud();
                ActionTuple { state, next, action }
            })
            .collect()
    }

    #[test]
    fn table_has_six_rows_and_is_deterministic() {
        let (train, test) = (tuples(20, 1), tuples(6, 2));
        let job = toy_job();
        let enc = EncoderParams::init(job.dims.encoder, 3);
        let a = evaluate(&train, &test, &enc, &job).unwrap();
        let b = evaluate(&train, &test, &enc, &job).unwrap();
        assert_eq!(a, b);
        let names: Vec<&str> = a.rows.iter().map(|r| r.method.as_str()).collect();
        assert_eq!(names, EVAL_METHODS);
        assert_eq!((a.train_tuples, a.val_tuples, a.test_tuples), (18, 2, 6));
        for r in &a.rows {
            for v in [r.val_mse, r.test_mse, r.cd, r.emd, r.hd] {
                assert!(v.is_finite() && v >= 0.0, "{r:?}");
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("table.csv");
        a.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert_eq!(text.lines().next().unwrap(), "method,val_mse,test_mse,cd,emd,hd");
    }

    #[test]
    fn perfect_predictions_score_zero() {
        let t = tuples(5, 4);
        let b = ActionBounds::default();
        let exact: Vec<GraspAction> = t.iter().map(|x| x.action).collect();
        assert_eq!(normalized_mse(&b, &exact, &t), 0.0);
        let d = rollout_distance(&SimParams::default(), &exact, &t).unwrap();
        assert_eq!((d.cd, d.emd, d.hd), (0.0, 0.0, 0.0));
    }
}
