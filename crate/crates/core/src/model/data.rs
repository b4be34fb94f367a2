use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, UnitSphere};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::mixed_distance;
use crate::planner::{lookup_template, validate_and_order, GridGeometry, PlacementPlan};
use crate::pointcloud::{farthest_point_indices, partition_indices, ply, ClusteredCloud, KMeans, Point3, PointCloud};
use crate::seed;
use crate::sim::{apply_grasp, observe, place_chunk, ActionBounds, ClayBody, GraspAction, SimParams};
use crate::subgoal::{Gains, Kind, Modification};

/// Points per cluster fed to the encoder during training.
pub const TRAIN_POINTS: usize = 256;
pub const DEFAULT_GAMMA_MIX: f64 = 0.5;

/// A state and a modified next state with the distance between them.
#[derive(Debug, Clone, PartialEq)]
pub struct PretrainPair {
    pub state: PointCloud,
    pub next: PointCloud,
    pub target: f64,
}

/// A cluster before and after a grasp, with the grasp.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionTuple {
    pub state: PointCloud,
    pub next: PointCloud,
    pub action: GraspAction,
}

/// Random modification of a random cluster, uniform over every choice.
pub fn random_modification(clusters: usize, rng: &mut seed::Rng) -> Modification {
    let kind = Kind::ALL[rng.random_range(0..Kind::ALL.len())];
    let direction = match kind {
        Kind::Lengthen | Kind::Shorten => UnitSphere.sample(rng),
        Kind::Thin => {
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            [a.cos(), a.sin(), 0.0]
        }
        Kind::Flatten => [0.0, 0.0, -1.0],
    };
    Modification { kind, cluster_id: rng.random_range(0..clusters), direction, weight: rng.random_range(0.0..=1.0) }
}

/// `count` pairs made by modifying random clusters of the seed clouds.
/// Targets are γ·CD + (1 − γ)·EMD.
pub fn generate_synthetic_pairs(
    seeds: &[ClusteredCloud],
    count: usize,
    gamma: f64,
    seed_: u64,
) -> Result<Vec<PretrainPair>> {
    if seeds.is_empty() || seeds.iter().any(|s| s.is_empty()) {
        return Err(Error::invalid("synthetic pairs need at least one non-empty seed cloud"));
    }
    let draws: Vec<(PointCloud, PointCloud)> = (0..count)
        .map(|i| {
            let mut rng = seed::rng(seed::derive_indexed(seed_, "synthetic-pair", i as u64));
            let cloud = &seeds[rng.random_range(0..seeds.len())];
            let m = random_modification(cloud.len(), &mut rng);
            let source = &cloud.clusters()[m.cluster_id];
            let next = m.apply(source, Gains::default())?;
            Ok((source.points().clone(), next.points().clone()))
        })
        .collect::<Result<_>>()?;
    draws
        .into_par_iter()
        .map(|(state, next)| {
            let target = mixed_distance(&state, &next, gamma)?;
            Ok(PretrainPair { state, next, target })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimDatasetConfig {
    /// Template names to build; one is drawn per tuple.
    pub shapes: Vec<String>,
    pub clusters: usize,
    pub points: usize,
    pub noise_sigma: f64,
    /// Horizontal jitter of the grasp center around the sampled particle, meters.
    pub grasp_jitter: f64,
    pub sim: SimParams,
    pub bounds: ActionBounds,
    pub geometry: GridGeometry,
}

impl Default for SimDatasetConfig {
    fn default() -> Self {
        SimDatasetConfig {
            shapes: crate::planner::template_names(),
            clusters: 10,
            points: TRAIN_POINTS,
            noise_sigma: 0.0,
            grasp_jitter: 0.005,
            sim: SimParams::default(),
            bounds: ActionBounds::default(),
            geometry: GridGeometry::default(),
        }
    }
}

/// Places every chunk of `plan` in order.
pub fn build_body(plan: &PlacementPlan, params: &SimParams, seed_: u64) -> Result<ClayBody> {
    let mut body = ClayBody::new(params);
    for (n, p) in plan.placements.iter().enumerate() {
        body = place_chunk(&body, p, params, seed::derive_indexed(seed_, "chunk", n as u64))?;
    }
    Ok(body)
}

fn template_body(name: &str, cfg: &SimDatasetConfig, seed_: u64) -> Result<ClayBody> {
    let t = lookup_template(name)?;
    let grid = t.grid(cfg.geometry)?;
    let plan = validate_and_order(&grid, &grid.cells())?;
    build_body(&plan, &cfg.sim, seed_)
}

/// Template bodies, observed and clustered, with every cluster downsampled
/// to at most `cfg.points`. Used as pre-training seeds.
pub fn seed_clouds(cfg: &SimDatasetConfig, seed_: u64) -> Result<Vec<ClusteredCloud>> {
    cfg.shapes
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let s = seed::derive_indexed(seed_, "seed-cloud", i as u64);
            let body = template_body(name, cfg, s)?;
            let cloud = observe(&body, cfg.noise_sigma, seed::derive(s, "observe"))?;
            let parts = partition_indices(&cloud, cfg.clusters, &KMeans::new(seed::derive(s, "cluster")))?;
            let clusters = parts
                .iter()
                .enumerate()
                .map(|(id, idx)| {
                    let pts = cloud.select(idx);
                    let keep = farthest_point_indices(pts.points(), cfg.points.min(pts.len()), s)?;
                    crate::pointcloud::Cluster::new(id, pts.select(&keep))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(crate::pointcloud::order_clusters(clusters))
        })
        .collect()
}

/// Random grasps on random template shapes. The state is the cluster whose
/// centroid is nearest the grasp center; the next state is the same particles
/// after the grasp. Grasps that leave that cluster unchanged are redrawn.
pub fn simulate_action_tuples(cfg: &SimDatasetConfig, count: usize, seed_: u64) -> Result<Vec<ActionTuple>> {
    if cfg.shapes.is_empty() {
        return Err(Error::invalid("no shapes to simulate"));
    }
    (0..count)
        .into_par_iter()
        .map(|i| simulate_one(cfg, seed::derive_indexed(seed_, "action-tuple", i as u64)))
        .collect()
}

const MAX_REDRAWS: usize = 50;

fn simulate_one(cfg: &SimDatasetConfig, s: u64) -> Result<ActionTuple> {
    let mut rng = seed::rng(s);
    let name = &cfg.shapes[rng.random_range(0..cfg.shapes.len())];
    let body = template_body(name, cfg, seed::derive(s, "body"))?;
    let cloud = observe(&body, cfg.noise_sigma, seed::derive(s, "observe"))?;
    let parts = partition_indices(&cloud, cfg.clusters, &KMeans::new(seed::derive(s, "cluster")))?;
    let centroids: Vec<Point3> = parts
        .iter()
        .map(|idx| crate::pointcloud::centroid(&cloud.select(idx).into_points()).expect("non-empty"))
        .collect();
    let b = &cfg.bounds;
    for _ in 0..MAX_REDRAWS {
        let p = body.particles()[rng.random_range(0..body.len())];
        let j = cfg.grasp_jitter;
        let action = GraspAction {
            x: (p.x + rng.random_range(-j..=j)).clamp(b.min[0], b.max[0]),
            y: (p.y + rng.random_range(-j..=j)).clamp(b.min[1], b.max[1]),
            z: p.z.clamp(b.min[2], b.max[2]),
            rot_z: rng.random_range(b.min[3]..b.max[3]),
            aperture: rng.random_range(b.min[4]..=b.max[4]),
        };
        let center = Point3::new(action.x, action.y, action.z);
        let nearest = (0..centroids.len())
            .min_by(|&a, &c| centroids[a].dist_sq(center).total_cmp(&centroids[c].dist_sq(center)))
            .expect("clusters");
        let after = apply_grasp(&body, &action, &cfg.sim);
        let idx = &parts[nearest];
        let keep = farthest_point_indices(&cloud.select(idx).into_points(), cfg.points.min(idx.len()), s)?;
        let chosen: Vec<usize> = keep.iter().map(|&k| idx[k]).collect();
        let moved = chosen.iter().any(|&i| after.particles()[i] != body.particles()[i]);
        if !moved {
            continue;
        }
        // Observation noise is drawn per cloud so both sides see independent noise.
        let post = observe(&after, cfg.noise_sigma, seed::derive(s, "observe-post"))?;
        return Ok(ActionTuple { state: cloud.select(&chosen), next: post.select(&chosen), action });
    }
    Err(Error::InvalidState(format!("no effective grasp found for {name} after {MAX_REDRAWS} draws")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub state_ply: String,
    pub next_ply: String,
    pub action: Option<[f64; 5]>,
    pub target_distance: Option<f64>,
}

/// Writes PLY files and `dataset.jsonl` into `dir`.
pub fn write_dataset(
    dir: &Path,
    items: impl IntoIterator<Item = (PointCloud, PointCloud, Option<GraspAction>, Option<f64>)>,
) -> Result<usize> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut lines = String::new();
    let mut n = 0;
    for (i, (state, next, action, target)) in items.into_iter().enumerate() {
        let rec = DatasetRecord {
            state_ply: format!("{i:05}_state.ply"),
            next_ply: format!("{i:05}_next.ply"),
            action: action.map(GraspAction::to_array),
            target_distance: target,
        };
        ply::write(dir.join(&rec.state_ply), &state)?;
        ply::write(dir.join(&rec.next_ply), &next)?;
        lines.push_str(&serde_json::to_string(&rec)?);
        lines.push('\n');
        n += 1;
    }
    let path = dir.join("dataset.jsonl");
    std::fs::write(&path, lines).map_err(|e| Error::io(&path, e))?;
    Ok(n)
}

pub fn write_pairs(dir: &Path, pairs: &[PretrainPair]) -> Result<usize> {
    write_dataset(dir, pairs.iter().map(|p| (p.state.clone(), p.next.clone(), None, Some(p.target))))
}

pub fn write_tuples(dir: &Path, tuples: &[ActionTuple], gamma: f64) -> Result<usize> {
    let targets = tuples.iter().map(|t| mixed_distance(&t.state, &t.next, gamma)).collect::<Result<Vec<_>>>()?;
    write_dataset(
        dir,
        tuples.iter().zip(targets).map(|(t, d)| (t.state.clone(), t.next.clone(), Some(t.action), Some(d))),
    )
}

pub fn read_dataset(dir: &Path) -> Result<Vec<(PointCloud, PointCloud, DatasetRecord)>> {
    let path = dir.join("dataset.jsonl");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let rec: DatasetRecord = serde_json::from_str(l)?;
            let state = ply::read(dir.join(&rec.state_ply))?;
            let next = ply::read(dir.join(&rec.next_ply))?;
            if state.len() != next.len() {
                return Err(Error::Format {
                    what: "dataset",
                    detail: format!("{} and {} differ in size", rec.state_ply, rec.next_ply),
                });
            }
            Ok((state, next, rec))
        })
        .collect()
}

pub fn read_pairs(dir: &Path) -> Result<Vec<PretrainPair>> {
    read_dataset(dir)?
        .into_iter()
        .map(|(state, next, rec)| {
            let target = rec
                .target_distance
                .ok_or(Error::Format { what: "dataset", detail: "record without target_distance".into() })?;
            Ok(PretrainPair { state, next, target })
        })
        .collect()
}

pub fn read_tuples(dir: &Path) -> Result<Vec<ActionTuple>> {
    read_dataset(dir)?
        .into_iter()
        .map(|(state, next, rec)| {
            let a = rec.action.ok_or(Error::Format { what: "dataset", detail: "record without action".into() })?;
            Ok(ActionTuple { state, next, action: GraspAction::from_array(a) })
        })
        .collect()
}
