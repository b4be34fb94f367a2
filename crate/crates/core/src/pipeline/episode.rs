use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ActionBackendKind, Backends, PlannerBackend, RunConfig, SubgoalBackendKind};
use crate::error::{Error, Result};
use crate::llm::{ChatTransport, HttpTransport};
use crate::metrics::{chamfer, DistanceReport};
use crate::model::{load_model, random_action, ActionModel};
use crate::planner::{self, language_suite, lookup_template, template_backend, Cell, LenientTemplates};
use crate::pointcloud::{
    farthest_point_indices, order_clusters, ordering_permutation, partition_indices, ply, Cluster, ClusteredCloud,
    KMeans, Point3, Z_TIE_EPS,
};
use crate::seed;
use crate::sim::log::{ActionParams, EpisodeLog, EpisodeRecord};
use crate::sim::{apply_grasp, observe, place_chunk, ActionBounds, ClayBody, GraspAction, SimParams};
use crate::subgoal::{
    propose_subgoal, template_sample, HeuristicBackend, LanguageBackend, Modification, SubGoal, SubgoalBackend,
};

/// Template lattice density used by the progress metric and final report.
const TEMPLATE_SAMPLE_PER_AXIS: usize = 4;
/// Both clouds are farthest-point sampled to a common size (at most this)
/// for the final report, since EMD needs equal sizes.
const FINAL_REPORT_POINTS: usize = 512;
/// Ranked sub-goals tried in one round when the proposed one has no grasp.
const SUBGOAL_FALLBACKS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    pub plan: String,
    pub planner_audit: String,
    pub episode_log: String,
    pub subgoal_log: String,
    pub snapshots: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// The sub-goal acted on; the proposed one unless a fallback was used.
    pub subgoal: Option<Modification>,
    /// How many ranked fallbacks were passed over before `subgoal`.
    #[serde(default)]
    pub fallback: usize,
    pub action: Option<GraspAction>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub skipped: Option<String>,
    pub snapshot: Option<String>,
    pub chamfer_to_template: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub prompt: String,
    pub seed: u64,
    pub backends: Backends,
    pub plan: Vec<Cell>,
    pub planner_iterations: usize,
    pub rounds: Vec<RoundRecord>,
    /// Chamfer between the clay and the template sample right after placement.
    pub chamfer_initial: Option<f64>,
    pub chamfer_final: Option<f64>,
    pub final_distance: Option<DistanceReport>,
    pub artifacts: Artifacts,
    pub runtime_ms: u64,
}

impl EpisodeReport {
    pub fn improved(&self) -> Option<bool> {
        Some(self.chamfer_final? < self.chamfer_initial?)
    }
}

/// Written instead of a report when an episode fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeFailure {
    pub prompt: String,
    pub seed: u64,
    pub error_kind: String,
    pub message: String,
    pub exit_code: i32,
}

impl EpisodeFailure {
    pub fn new(cfg: &RunConfig, e: &Error) -> Self {
        EpisodeFailure {
            prompt: cfg.prompt.clone(),
            seed: cfg.seed,
            error_kind: e.kind().into(),
            message: e.to_string(),
            exit_code: e.exit_code(),
        }
    }
}

pub const REPORT_FILE: &str = "report.json";
pub const FAILURE_FILE: &str = "failure.json";

/// A clustered observation together with the particle index behind every
/// cluster point.
struct Perceived {
    cloud: ClusteredCloud,
    particles: Vec<Vec<usize>>,
}

fn perceive(body: &ClayBody, cfg: &RunConfig, s: u64) -> Result<Perceived> {
    let obs = observe(body, cfg.perception.noise_sigma, seed::derive(s, "observe"))?;
    let ws = cfg.workspace_bounds()?;
    let inside: Vec<usize> = (0..obs.len()).filter(|&i| ws.contains(obs.points()[i])).collect();
    if inside.is_empty() {
        return Err(Error::NoClayObserved);
    }
    let cropped = obs.select(&inside);
    let k = cfg.perception.clusters.min(cropped.len());
    let parts = partition_indices(&cropped, k, &KMeans::new(seed::derive(s, "cluster")))?;
    let mut clusters = Vec::with_capacity(parts.len());
    let mut particles = Vec::with_capacity(parts.len());
    for (id, part) in parts.iter().enumerate() {
        let pts = cropped.select(part);
        let n = cfg.perception.points.min(pts.len());
        let keep = farthest_point_indices(pts.points(), n, seed::derive_indexed(s, "downsample", id as u64))?;
        clusters.push(Cluster::new(id, pts.select(&keep))?);
        particles.push(keep.iter().map(|&f| inside[part[f]]).collect::<Vec<_>>());
    }
    // order_clusters applies this same permutation.
    let centroids: Vec<_> = clusters.iter().map(Cluster::centroid).collect();
    let perm = ordering_permutation(&centroids, Z_TIE_EPS);
    let particles = perm.iter().map(|&j| std::mem::take(&mut particles[j])).collect();
    Ok(Perceived { cloud: order_clusters(clusters), particles })
}

/// What an action backend sees for one round.
pub struct ActionContext<'a> {
    pub body: &'a ClayBody,
    /// Particle index behind every observed cluster point, per cluster.
    pub particles: &'a [Vec<usize>],
    /// Index of the target cluster in `particles`.
    pub cluster: usize,
    pub state: &'a Cluster,
    /// Point-for-point image of `state` under the sub-goal modification.
    pub goal: &'a Cluster,
    pub bounds: &'a ActionBounds,
    pub sim: &'a SimParams,
}

pub trait ActionBackend {
    fn name(&self) -> &str;
    /// `None` means no grasp this round.
    fn choose(&mut self, ctx: &ActionContext) -> Result<Option<GraspAction>>;
}

/// Simulated look-ahead over a fixed lattice of grasps centered on the
/// cluster. A grasp is scored by how far the observed particles end up from
/// where the sub-goal wants them: target-cluster particles at their modified
/// positions, every other particle where it is now. The best grasp is kept
/// if it beats doing nothing.
pub struct SearchActions;

impl SearchActions {
    /// Jaw closures, as fractions of the cluster's width along the jaw axis.
    const SQUEEZE: [f64; 5] = [0.95, 0.9, 0.8, 0.7, 0.5];

    pub fn candidates(cluster: &Cluster, bounds: &ActionBounds) -> Vec<GraspAction> {
        let center = cluster.centroid();
        let yaws = [-std::f64::consts::FRAC_PI_2, -std::f64::consts::FRAC_PI_4, 0.0, std::f64::consts::FRAC_PI_4];
        let mut out = Vec::new();
        for dz in [-0.005, 0.0, 0.005] {
            for &rot_z in &yaws {
                let (sin, cos) = rot_z.sin_cos();
                let width = 2.0
                    * cluster
                        .points()
                        .points()
                        .iter()
                        .map(|p| ((p.x - center.x) * cos + (p.y - center.y) * sin).abs())
                        .fold(0.0, f64::max);
                for aperture in Self::SQUEEZE.map(|f| f * width) {
                    out.push(GraspAction {
                        x: center.x.clamp(bounds.min[0], bounds.max[0]),
                        y: center.y.clamp(bounds.min[1], bounds.max[1]),
                        z: (center.z + dz).clamp(bounds.min[2], bounds.max[2]),
                        rot_z: rot_z.clamp(bounds.min[3], bounds.max[3] - 1e-12),
                        aperture: aperture.clamp(bounds.min[4], bounds.max[4]),
                    });
                }
            }
        }
        out
    }
}

impl ActionBackend for SearchActions {
    fn name(&self) -> &str {
        "search"
    }

    fn choose(&mut self, ctx: &ActionContext) -> Result<Option<GraspAction>> {
        let mut wanted: Vec<(usize, Point3)> = Vec::new();
        for (c, ids) in ctx.particles.iter().enumerate() {
            if c == ctx.cluster {
                wanted.extend(ids.iter().copied().zip(ctx.goal.points().points().iter().copied()));
            } else {
                wanted.extend(ids.iter().map(|&i| (i, ctx.body.particles()[i])));
            }
        }
        let error = |b: &ClayBody| -> f64 { wanted.iter().map(|&(i, p)| (b.particles()[i] - p).norm_sq()).sum() };
        let mut best = (error(ctx.body), None);
        for g in Self::candidates(ctx.state, ctx.bounds) {
            let d = error(&apply_grasp(ctx.body, &g, ctx.sim));
            if d < best.0 {
                best = (d, Some(g));
            }
        }
        Ok(best.1)
    }
}

pub struct ModelActions(pub ActionModel);

impl ActionBackend for ModelActions {
    fn name(&self) -> &str {
        "model"
    }

    fn choose(&mut self, ctx: &ActionContext) -> Result<Option<GraspAction>> {
        self.0.predict_action(ctx.state.points(), ctx.goal.points()).map(Some)
    }
}

pub struct RandomActions(pub seed::Rng);

impl ActionBackend for RandomActions {
    fn name(&self) -> &str {
        "random"
    }

    fn choose(&mut self, ctx: &ActionContext) -> Result<Option<GraspAction>> {
        Ok(Some(random_action(ctx.bounds, &mut self.0)))
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

struct Snapshots {
    dir: PathBuf,
    names: Vec<String>,
}

impl Snapshots {
    fn save(&mut self, body: &ClayBody) -> Result<String> {
        let name = format!("step_{:04}.ply", self.names.len() + 1);
        ply::write(self.dir.join(&name), &body.as_cloud())?;
        self.names.push(name.clone());
        Ok(name)
    }

    fn last(&self) -> Option<String> {
        self.names.last().cloned()
    }
}

/// Runs one episode, writing artifacts into `cfg.output_dir`. On failure a
/// structured failure record is written there and the error is returned.
pub fn run_episode(cfg: &RunConfig) -> Result<EpisodeReport> {
    run_episode_with(cfg, None)
}

/// As [`run_episode`], with an explicit chat transport for the language
/// backends (otherwise HTTP is used).
pub fn run_episode_with(cfg: &RunConfig, transport: Option<Arc<dyn ChatTransport>>) -> Result<EpisodeReport> {
    let out = &cfg.output_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let result = episode(cfg, transport);
    let _ = std::fs::remove_file(out.join(FAILURE_FILE));
    match &result {
        Ok(report) => write_text(&out.join(REPORT_FILE), &serde_json::to_string_pretty(report)?)?,
        Err(e) => {
            let _ = std::fs::remove_file(out.join(REPORT_FILE));
            write_text(&out.join(FAILURE_FILE), &serde_json::to_string_pretty(&EpisodeFailure::new(cfg, e))?)?;
        }
    }
    result
}

fn transport_for(cfg: &RunConfig, given: &Option<Arc<dyn ChatTransport>>) -> Arc<dyn ChatTransport> {
    given.clone().unwrap_or_else(|| Arc::new(HttpTransport::new(cfg.llm.clone())))
}

fn episode(cfg: &RunConfig, transport: Option<Arc<dyn ChatTransport>>) -> Result<EpisodeReport> {
    let started = Instant::now();
    cfg.validate()?;
    let out = &cfg.output_dir;
    let prompt = cfg.prompt.as_str();

    // Coarse stage: plan and place.
    let suite = match cfg.backends.planner {
        PlannerBackend::Template => template_backend(prompt, cfg.planner.batch)?,
        PlannerBackend::Llm => language_suite(
            transport_for(cfg, &transport),
            cfg.llm.retries,
            cfg.planner.batch,
            Box::new(LenientTemplates),
        ),
    };
    let outcome = planner::plan(prompt, &suite, &cfg.planner_config())?;
    let artifacts_plan = "plan.json".to_string();
    outcome.plan.write(out.join(&artifacts_plan))?;
    let audit_name = "planner_audit.jsonl".to_string();
    write_text(&out.join(&audit_name), &outcome.audit_jsonl()?)?;

    let template = lookup_template(prompt).ok().map(|t| template_sample(&t, &cfg.grid, TEMPLATE_SAMPLE_PER_AXIS));
    let progress = |b: &ClayBody| -> Result<Option<f64>> {
        match &template {
            Some(t) if !b.is_empty() => Ok(Some(chamfer(&b.as_cloud(), t)?)),
            _ => Ok(None),
        }
    };

    let log_name = "episode.jsonl".to_string();
    let mut log = EpisodeLog::create(out.join(&log_name))?;
    let mut snaps = Snapshots { dir: out.clone(), names: Vec::new() };
    let mut body = ClayBody::new(&cfg.sim);
    let mut step = 0;
    for (n, p) in outcome.plan.placements.iter().enumerate() {
        let pre = snaps.last();
        body = place_chunk(&body, p, &cfg.sim, seed::derive_indexed(cfg.seed, "chunk", n as u64))?;
        step += 1;
        let post = snaps.save(&body)?;
        log.append(&EpisodeRecord {
            step,
            action: ActionParams::Place(*p),
            pre_cloud_file: pre,
            post_cloud_file: post,
        })?;
    }
    let chamfer_initial = progress(&body)?;

    // Fine stage: refine cluster by cluster.
    let subgoals: Box<dyn SubgoalBackend> = match cfg.backends.subgoal {
        SubgoalBackendKind::Heuristic => Box::new(HeuristicBackend::for_prompt(prompt, &cfg.grid, cfg.gains)?),
        SubgoalBackendKind::Llm => Box::new(LanguageBackend::new(
            transport_for(cfg, &transport),
            cfg.llm.retries,
            seed::derive(cfg.seed, "llm-serialize"),
        )),
    };
    let mut actions: Box<dyn ActionBackend> = match cfg.backends.action {
        ActionBackendKind::Search => Box::new(SearchActions),
        ActionBackendKind::Random => Box::new(RandomActions(seed::substream(cfg.seed, "random-actions"))),
        ActionBackendKind::Model => {
            let path = cfg.model.as_ref().ok_or_else(|| Error::Config("model backend without checkpoint".into()))?;
            Box::new(ModelActions(load_model(path)?))
        }
    };
    let subgoal_name = "subgoals.jsonl".to_string();
    let mut subgoal_lines = String::new();
    let mut rounds = Vec::new();
    if body.is_empty() {
        log.finish()?;
        write_text(&out.join(&subgoal_name), "")?;
        return Err(Error::InvalidState("the plan placed no clay; nothing to refine".into()));
    }
    for round in 0..cfg.max_rounds {
        let s = seed::derive_indexed(cfg.seed, "round", round as u64);
        let seen = perceive(&body, cfg, s)?;
        let (decision, sub) = propose_subgoal(&seen.cloud, prompt, subgoals.as_ref(), cfg.gains)?;
        subgoal_lines.push_str(&serde_json::to_string(&serde_json::json!({ "round": round, "decision": decision }))?);
        subgoal_lines.push('\n');
        let mut rec = RoundRecord {
            round,
            subgoal: decision.modification,
            fallback: 0,
            action: None,
            skipped: None,
            snapshot: None,
            chamfer_to_template: None,
        };
        let Some(sub) = sub else {
            rec.skipped = Some(decision.note.clone().unwrap_or_else(|| "no sub-goal proposed".into()));
            rounds.push(rec);
            // The heuristic is deterministic: no proposal now means none later.
            if cfg.backends.subgoal == SubgoalBackendKind::Heuristic {
                break;
            }
            continue;
        };
        let mut tried = vec![sub];
        let mut fallbacks: Option<std::vec::IntoIter<Modification>> = None;
        let mut chosen = None;
        while let Some(sub) = tried.last() {
            let id = sub.modification.cluster_id;
            let ctx = ActionContext {
                body: &body,
                particles: &seen.particles,
                cluster: id,
                state: &seen.cloud.clusters()[id],
                goal: &sub.target_cluster,
                bounds: &cfg.action_bounds,
                sim: &cfg.sim,
            };
            if let Some(a) = actions.choose(&ctx)? {
                chosen = Some((sub.modification, a));
                break;
            }
            // Nothing realizes this sub-goal; fall back to the next-ranked one.
            let next = match &mut fallbacks {
                Some(it) => it.next(),
                None => {
                    fallbacks.insert(subgoals.alternatives(&seen.cloud, prompt, SUBGOAL_FALLBACKS)?.into_iter()).next()
                }
            };
            let Some(m) = next else { break };
            let source = &seen.cloud.clusters()[m.cluster_id];
            tried.push(SubGoal { modification: m, target_cluster: m.apply(source, cfg.gains)? });
        }
        match chosen {
            None => rec.skipped = Some(format!("{} backend found no helpful grasp", actions.name())),
            Some((m, a)) => {
                cfg.action_bounds.validate(&a)?;
                let pre = snaps.last();
                body = apply_grasp(&body, &a, &cfg.sim);
                step += 1;
                let post = snaps.save(&body)?;
                log.append(&EpisodeRecord {
                    step,
                    action: ActionParams::Grasp(a),
                    pre_cloud_file: pre,
                    post_cloud_file: post.clone(),
                })?;
                rec.subgoal = Some(m);
                rec.fallback = tried.len() - 1;
                rec.action = Some(a);
                rec.snapshot = Some(post);
                rec.chamfer_to_template = progress(&body)?;
            }
        }
        rounds.push(rec);
    }
    log.finish()?;
    write_text(&out.join(&subgoal_name), &subgoal_lines)?;

    let chamfer_final = progress(&body)?;
    let final_distance = match &template {
        Some(t) => {
            let s = seed::derive(cfg.seed, "final-report");
            let cloud = body.as_cloud();
            let m = cloud.len().min(t.len()).min(FINAL_REPORT_POINTS);
            let a = cloud.select(&farthest_point_indices(cloud.points(), m, s)?);
            let b = t.select(&farthest_point_indices(t.points(), m, s)?);
            Some(DistanceReport::compute(&a, &b)?)
        }
        None => None,
    };
    Ok(EpisodeReport {
        prompt: prompt.to_string(),
        seed: cfg.seed,
        backends: cfg.backends,
        plan: outcome.plan.cells(),
        planner_iterations: outcome.iterations,
        rounds,
        chamfer_initial,
        chamfer_final,
        final_distance,
        artifacts: Artifacts {
            plan: artifacts_plan,
            planner_audit: audit_name,
            episode_log: log_name,
            subgoal_log: subgoal_name,
            snapshots: snaps.names,
        },
        runtime_ms: started.elapsed().as_millis() as u64,
    })
}

/// Plans only; returns the outcome without touching the simulator.
pub fn plan_only(cfg: &RunConfig, transport: Option<Arc<dyn ChatTransport>>) -> Result<planner::PlanOutcome> {
    if cfg.offline && cfg.backends.planner == PlannerBackend::Llm {
        return Err(Error::Config("offline mode forbids the llm planner".into()));
    }
    let suite = match cfg.backends.planner {
        PlannerBackend::Template => template_backend(&cfg.prompt, cfg.planner.batch)?,
        PlannerBackend::Llm => language_suite(
            transport_for(cfg, &transport),
            cfg.llm.retries,
            cfg.planner.batch,
            Box::new(LenientTemplates),
        ),
    };
    planner::plan(&cfg.prompt, &suite, &cfg.planner_config())
}
