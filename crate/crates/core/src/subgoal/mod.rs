//! Cluster modifications (lengthen, shorten, flatten, thin), their text form
//! for language models, and sub-goal selection.

mod backend;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pointcloud::{downsample, order_clusters, Cluster, ClusteredCloud, Point3, PointCloud};

pub use backend::{
    propose_subgoal, template_sample, HeuristicBackend, LanguageBackend, SubgoalBackend, SubgoalDecision,
    PROMPT_TEMPLATE, WEIGHT_GRID,
};

/// Points per cluster in the text given to language models.
pub const LLM_POINTS_PER_CLUSTER: usize = 50;
const UNIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Lengthen,
    Shorten,
    Flatten,
    Thin,
}

impl Kind {
    pub const ALL: [Kind; 4] = [Kind::Lengthen, Kind::Shorten, Kind::Flatten, Kind::Thin];
}

/// Maximum relative stretch (lengthen) and compression (shorten, thin) at w = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gains {
    pub stretch: f64,
    pub compress: f64,
}

impl Default for Gains {
    fn default() -> Self {
        Gains { stretch: 0.5, compress: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Modification {
    pub kind: Kind,
    #[serde(rename = "cluster")]
    pub cluster_id: usize,
    pub direction: [f64; 3],
    pub weight: f64,
}

impl Modification {
    pub fn apply(&self, cluster: &Cluster, gains: Gains) -> Result<Cluster> {
        let d = Point3::from(self.direction);
        match self.kind {
            Kind::Lengthen => lengthen_with(cluster, d, self.weight, gains.stretch),
            Kind::Shorten => shorten_with(cluster, d, self.weight, gains.compress),
            Kind::Flatten => flatten(cluster, self.weight),
            Kind::Thin => thin_with(cluster, d, self.weight, gains.compress),
        }
    }

    pub fn validate(&self, clusters: usize) -> Result<()> {
        if self.cluster_id >= clusters {
            return Err(Error::invalid(format!("cluster {} out of range for {clusters} clusters", self.cluster_id)));
        }
        check_weight(self.weight)?;
        match self.kind {
            Kind::Flatten => Ok(()),
            Kind::Thin => check_horizontal(Point3::from(self.direction)),
            _ => check_unit(Point3::from(self.direction)),
        }
    }
}

/// A modified cluster the action model should reach from the current one.
#[derive(Debug, Clone, PartialEq)]
pub struct SubGoal {
    pub modification: Modification,
    pub target_cluster: Cluster,
}

fn check_weight(w: f64) -> Result<()> {
    if (0.0..=1.0).contains(&w) {
        Ok(())
    } else {
        Err(Error::invalid(format!("weight {w} outside [0, 1]")))
    }
}

fn check_unit(d: Point3) -> Result<()> {
    if d.is_finite() && (d.norm() - 1.0).abs() <= UNIT_TOL {
        Ok(())
    } else {
        Err(Error::invalid(format!("direction {:?} is not a unit vector", d.to_array())))
    }
}

fn check_horizontal(d: Point3) -> Result<()> {
    check_unit(d)?;
    if d.z.abs() > UNIT_TOL {
        return Err(Error::invalid("thin direction must be horizontal"));
    }
    Ok(())
}

/// p' = p + s·((p − c)·d)·d about the cluster centroid c.
fn scale_along(cluster: &Cluster, d: Point3, s: f64) -> Result<Cluster> {
    if s == 0.0 {
        return Ok(cluster.clone());
    }
    let c = cluster.centroid();
    let pts: Vec<Point3> = cluster.points().points().iter().map(|&p| p + d * (s * (p - c).dot(d))).collect();
    cluster.with_points(PointCloud::new(pts)?)
}

pub fn lengthen(cluster: &Cluster, d: Point3, w: f64) -> Result<Cluster> {
    lengthen_with(cluster, d, w, Gains::default().stretch)
}

pub fn lengthen_with(cluster: &Cluster, d: Point3, w: f64, gain: f64) -> Result<Cluster> {
    check_weight(w)?;
    check_unit(d)?;
    scale_along(cluster, d, w * gain)
}

pub fn shorten(cluster: &Cluster, d: Point3, w: f64) -> Result<Cluster> {
    shorten_with(cluster, d, w, Gains::default().compress)
}

pub fn shorten_with(cluster: &Cluster, d: Point3, w: f64, gain: f64) -> Result<Cluster> {
    check_weight(w)?;
    check_unit(d)?;
    if gain > 1.0 {
        return Err(Error::invalid("compression gain above 1 would invert the cluster"));
    }
    scale_along(cluster, d, -w * gain)
}

/// z' = z_min + (1 − w)(z − z_min); x and y are untouched.
pub fn flatten(cluster: &Cluster, w: f64) -> Result<Cluster> {
    check_weight(w)?;
    if w == 0.0 {
        return Ok(cluster.clone());
    }
    let pts = cluster.points().points();
    let z_min = pts.iter().map(|p| p.z).fold(f64::INFINITY, f64::min);
    let out: Vec<Point3> = pts.iter().map(|p| Point3::new(p.x, p.y, z_min + (1.0 - w) * (p.z - z_min))).collect();
    cluster.with_points(PointCloud::new(out)?)
}

/// Compresses across the horizontal direction `d_xy`, leaving z alone.
pub fn thin(cluster: &Cluster, d_xy: Point3, w: f64) -> Result<Cluster> {
    thin_with(cluster, d_xy, w, Gains::default().compress)
}

pub fn thin_with(cluster: &Cluster, d_xy: Point3, w: f64, gain: f64) -> Result<Cluster> {
    check_weight(w)?;
    check_horizontal(d_xy)?;
    if gain > 1.0 {
        return Err(Error::invalid("compression gain above 1 would invert the cluster"));
    }
    let n = Point3::new(-d_xy.y, d_xy.x, 0.0);
    scale_along(cluster, n, -w * gain)
}

/// One line per point, `cluster <id>: point at (x, y, z)` in meters to three
/// decimals, after downsampling each cluster and ordering bottom-up.
pub fn serialize_for_llm(cloud: &ClusteredCloud, seed: u64) -> Result<String> {
    let sampled = cloud
        .clusters()
        .iter()
        .map(|c| downsample(c, LLM_POINTS_PER_CLUSTER.min(c.len()), seed))
        .collect::<Result<Vec<_>>>()?;
    let ordered = order_clusters(sampled);
    let mut s = String::new();
    for c in ordered.clusters() {
        for p in c.points().points() {
            s.push_str(&format!("cluster {}: point at ({:.3}, {:.3}, {:.3})\n", c.id(), p.x, p.y, p.z));
        }
    }
    Ok(s)
}
