use std::sync::Arc;

use serde::Serialize;
use serde_json::Value;

use super::{Gains, Kind, Modification, SubGoal};
use crate::error::{Error, Result};
use crate::llm::{ask_json, ChatMessage, ChatTransport};
use crate::metrics::nn::KdTree;
use crate::planner::{lookup_template, GridGeometry, Template};
use crate::pointcloud::{ClusteredCloud, Point3, PointCloud};

pub const PROMPT_TEMPLATE: &str = include_str!("../../prompts/subgoal_v1.txt");

/// Weights tried by the heuristic search.
pub const WEIGHT_GRID: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

/// What a backend decided for one refinement round. Serialized into the
/// sub-goal audit log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgoalDecision {
    pub backend: String,
    pub modification: Option<Modification>,
    pub raw_replies: Vec<String>,
    /// Heuristic residual before and after the chosen modification.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

pub trait SubgoalBackend {
    fn name(&self) -> &str;
    fn choose(&self, cloud: &ClusteredCloud, prompt: &str) -> Result<SubgoalDecision>;

    /// Fallback modifications, best first, for when the chosen one cannot be
    /// carried out. Backends without a ranking offer none.
    fn alternatives(&self, _cloud: &ClusteredCloud, _prompt: &str, _limit: usize) -> Result<Vec<Modification>> {
        Ok(Vec::new())
    }
}

/// Asks the backend for a modification and applies it. `None` means the
/// round is skipped.
pub fn propose_subgoal(
    cloud: &ClusteredCloud,
    prompt: &str,
    backend: &dyn SubgoalBackend,
    gains: Gains,
) -> Result<(SubgoalDecision, Option<SubGoal>)> {
    let decision = backend.choose(cloud, prompt)?;
    let subgoal = match decision.modification {
        Some(m) => {
            m.validate(cloud.len())?;
            let source = cloud.get(m.cluster_id).expect("validated id");
            Some(SubGoal { modification: m, target_cluster: m.apply(source, gains)? })
        }
        None => None,
    };
    Ok((decision, subgoal))
}

/// Lattice of `per_axis`³ points filling every template cell.
pub fn template_sample(template: &Template, geometry: &GridGeometry, per_axis: usize) -> PointCloud {
    let h = geometry.cell_m;
    let offs: Vec<f64> = (0..per_axis).map(|a| ((a as f64 + 0.5) / per_axis as f64 - 0.5) * h).collect();
    let mut pts = Vec::with_capacity(template.cells.len() * per_axis.pow(3));
    for &cell in &template.cells {
        let c = geometry.cell_center(cell);
        for &dz in &offs {
            for &dy in &offs {
                for &dx in &offs {
                    pts.push(c + Point3::new(dx, dy, dz));
                }
            }
        }
    }
    pts.into_iter().collect()
}

/// Candidate modifications in search order.
pub(crate) fn candidates(clusters: usize) -> Vec<Modification> {
    let axes = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let mut out = Vec::new();
    for cluster_id in 0..clusters {
        for kind in Kind::ALL {
            let dirs: &[[f64; 3]] = match kind {
                Kind::Lengthen | Kind::Shorten => &axes,
                Kind::Thin => &axes[..2],
                Kind::Flatten => &[[0.0, 0.0, -1.0]],
            };
            for &direction in dirs {
                for weight in WEIGHT_GRID {
                    out.push(Modification { kind, cluster_id, direction, weight });
                }
            }
        }
    }
    out
}

/// Picks the single modification that most lowers the chamfer distance
/// between the whole cloud and a target sample.
pub struct HeuristicBackend {
    target: PointCloud,
    gains: Gains,
}

impl HeuristicBackend {
    pub fn new(target: PointCloud, gains: Gains) -> Result<Self> {
        if target.is_empty() {
            return Err(Error::invalid("heuristic target sample is empty"));
        }
        Ok(HeuristicBackend { target, gains })
    }

    /// Targets the prompt's registered template, sampled 4 points per cell edge.
    pub fn for_prompt(prompt: &str, geometry: &GridGeometry, gains: Gains) -> Result<Self> {
        let t = lookup_template(prompt)?;
        Self::new(template_sample(&t, geometry, 4), gains)
    }

    pub fn target(&self) -> &PointCloud {
        &self.target
    }

    /// Best candidate and its residual, with the unmodified residual.
    fn search(&self, cloud: &ClusteredCloud) -> Result<(f64, Option<(Modification, f64)>)> {
        let (base, scored) = self.score_all(cloud)?;
        let mut winner: Option<(Modification, f64)> = None;
        for (m, r) in scored {
            if winner.is_none_or(|(_, w)| r < w) {
                winner = Some((m, r));
            }
        }
        Ok((base, winner))
    }

    /// Residual of every candidate, in candidate order, with the unmodified
    /// residual.
    fn score_all(&self, cloud: &ClusteredCloud) -> Result<(f64, Vec<(Modification, f64)>)> {
        let target = self.target.points();
        let target_tree = KdTree::new(target);
        let n_cloud: usize = cloud.clusters().iter().map(|c| c.len()).sum();
        if n_cloud == 0 {
            return Err(Error::NoClayObserved);
        }
        let own: Vec<f64> = cloud
            .clusters()
            .iter()
            .map(|c| c.points().points().iter().map(|&p| target_tree.nearest_dist_sq(p)).sum())
            .collect();
        let own_total: f64 = own.iter().sum();

        // For each target point: nearest cluster, its distance, and the
        // runner-up distance over the remaining clusters.
        let mut best = vec![(f64::INFINITY, usize::MAX, f64::INFINITY); target.len()];
        for (ci, c) in cloud.clusters().iter().enumerate() {
            let tree = KdTree::new(c.points().points());
            for (t, slot) in target.iter().zip(best.iter_mut()) {
                let d = tree.nearest_dist_sq(*t);
                if d < slot.0 {
                    *slot = (d, ci, slot.0);
                } else if d < slot.2 {
                    slot.2 = d;
                }
            }
        }
        let nt = target.len() as f64;
        let nc = n_cloud as f64;
        let base = own_total / nc + best.iter().map(|b| b.0).sum::<f64>() / nt;

        let mut scored = Vec::new();
        for m in candidates(cloud.len()) {
            let source = &cloud.clusters()[m.cluster_id];
            let moved = m.apply(source, self.gains)?;
            let moved_pts = moved.points().points();
            let moved_tree = KdTree::new(moved_pts);
            let forward: f64 =
                own_total - own[m.cluster_id] + moved_pts.iter().map(|&p| target_tree.nearest_dist_sq(p)).sum::<f64>();
            let backward: f64 = target
                .iter()
                .zip(&best)
                .map(|(t, b)| {
                    let others = if b.1 == m.cluster_id { b.2 } else { b.0 };
                    others.min(moved_tree.nearest_dist_sq(*t))
                })
                .sum();
            scored.push((m, forward / nc + backward / nt));
        }
        Ok((base, scored))
    }
}

impl SubgoalBackend for HeuristicBackend {
    fn name(&self) -> &str {
        "heuristic"
    }

    fn choose(&self, cloud: &ClusteredCloud, _prompt: &str) -> Result<SubgoalDecision> {
        let (base, winner) = self.search(cloud)?;
        let mut d = SubgoalDecision {
            backend: self.name().into(),
            modification: None,
            raw_replies: Vec::new(),
            residual: None,
            note: None,
        };
        match winner {
            Some((m, r)) if r < base => {
                d.modification = Some(m);
                d.residual = Some((base, r));
            }
            _ => d.note = Some("no candidate lowers the residual".into()),
        }
        Ok(d)
    }

    /// Every residual-lowering candidate after the winner, best first.
    fn alternatives(&self, cloud: &ClusteredCloud, _prompt: &str, limit: usize) -> Result<Vec<Modification>> {
        let (base, mut scored) = self.score_all(cloud)?;
        scored.retain(|(_, r)| *r < base);
        // stable: equal residuals keep candidate order, as in `choose`
        scored.sort_by(|a, b| a.1.total_cmp(&b.1));
        Ok(scored.into_iter().skip(1).take(limit).map(|(m, _)| m).collect())
    }
}

/// Sub-goals from a chat model prompted with the serialized clusters.
pub struct LanguageBackend {
    transport: Arc<dyn ChatTransport>,
    retries: usize,
    seed: u64,
}

impl LanguageBackend {
    pub fn new(transport: Arc<dyn ChatTransport>, retries: usize, seed: u64) -> Self {
        LanguageBackend { transport, retries, seed }
    }

    pub fn render_prompt(&self, cloud: &ClusteredCloud, prompt: &str) -> Result<String> {
        let points = super::serialize_for_llm(cloud, self.seed)?;
        Ok(PROMPT_TEMPLATE
            .lines()
            .filter(|l| !l.starts_with('#'))
            .collect::<Vec<_>>()
            .join("\n")
            .replace("{POINTS}", points.trim_end())
            .replace("{PROMPT}", prompt))
    }
}

/// Strict reply parser; directions are normalized, thin directions are
/// projected onto the floor plane first.
pub(crate) fn parse_modification(v: &Value, clusters: usize) -> std::result::Result<Modification, String> {
    let kind: Kind = v
        .get("kind")
        .cloned()
        .ok_or("missing 'kind'")
        .and_then(|k| serde_json::from_value(k).map_err(|_| "unknown 'kind'"))?;
    let cluster_id = v.get("cluster").and_then(Value::as_u64).ok_or("missing integer 'cluster'")? as usize;
    if cluster_id >= clusters {
        return Err(format!("cluster {cluster_id} does not exist; ids are 0..{}", clusters - 1));
    }
    let raw = v
        .get("direction")
        .and_then(Value::as_array)
        .filter(|a| a.len() == 3)
        .ok_or("'direction' must be [dx, dy, dz]")?;
    let mut d = [0.0; 3];
    for (o, x) in d.iter_mut().zip(raw) {
        *o = x.as_f64().ok_or("direction entries must be numbers")?;
    }
    if kind == Kind::Thin {
        d[2] = 0.0;
    }
    let norm = Point3::from(d).norm();
    if !(norm > 1e-9) || !norm.is_finite() {
        return Err(if kind == Kind::Thin {
            "thin needs a horizontal direction".into()
        } else {
            "direction must be non-zero".into()
        });
    }
    let direction = d.map(|x| x / norm);
    let weight = v.get("weight").and_then(Value::as_f64).ok_or("missing number 'weight'")?;
    if !(0.0..=1.0).contains(&weight) {
        return Err(format!("weight {weight} outside [0, 1]"));
    }
    Ok(Modification { kind, cluster_id, direction, weight })
}

impl SubgoalBackend for LanguageBackend {
    fn name(&self) -> &str {
        "llm"
    }

    fn choose(&self, cloud: &ClusteredCloud, prompt: &str) -> Result<SubgoalDecision> {
        if cloud.is_empty() {
            return Err(Error::NoClayObserved);
        }
        let text = self.render_prompt(cloud, prompt)?;
        let k = cloud.len();
        let out = ask_json(self.transport.as_ref(), vec![ChatMessage::user(text)], self.retries, |v| {
            parse_modification(v, k)
        })?;
        let exhausted = out.value.is_none();
        Ok(SubgoalDecision {
            backend: self.name().into(),
            modification: out.value,
            raw_replies: out.attempts.into_iter().map(|a| a.reply).collect(),
            residual: None,
            note: exhausted.then(|| "replies exhausted; round skipped".into()),
        })
    }
}
