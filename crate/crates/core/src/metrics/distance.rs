use serde::{Deserialize, Serialize};

use super::assignment::{self, CostMatrix};
use super::nn::KdTree;
use crate::error::{Error, Result};
use crate::pointcloud::PointCloud;

/// Largest cloud the exact EMD solver accepts.
pub const EMD_MAX_POINTS: usize = 512;

fn require_nonempty(a: &PointCloud, b: &PointCloud) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("distance between empty clouds is undefined"));
    }
    Ok(())
}

/// Mean of squared nearest-neighbor distances from each point of `from` to `to`.
fn directed_mean_sq(from: &PointCloud, to: &KdTree) -> f64 {
    let sum: f64 = from.points().iter().map(|p| to.nearest_dist_sq(*p)).sum();
    sum / from.len() as f64
}

fn directed_max(from: &PointCloud, to: &KdTree) -> f64 {
    from.points().iter().map(|p| to.nearest_dist_sq(*p)).fold(0.0, f64::max).sqrt()
}

/// Symmetric Chamfer distance with squared point distances, each side mean-normalized.
pub fn chamfer(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    require_nonempty(a, b)?;
    let ta = KdTree::new(a.points());
    let tb = KdTree::new(b.points());
    Ok(directed_mean_sq(a, &tb) + directed_mean_sq(b, &ta))
}

/// One-sided Chamfer term: mean squared distance from `a` to its nearest point in `b`.
pub fn chamfer_directed(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    require_nonempty(a, b)?;
    Ok(directed_mean_sq(a, &KdTree::new(b.points())))
}

/// Largest nearest-neighbor distance from `a` to `b`.
pub fn hausdorff_directed(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    require_nonempty(a, b)?;
    Ok(directed_max(a, &KdTree::new(b.points())))
}

pub fn hausdorff(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    require_nonempty(a, b)?;
    let ta = KdTree::new(a.points());
    let tb = KdTree::new(b.points());
    Ok(directed_max(a, &tb).max(directed_max(b, &ta)))
}

/// Optimal bijection from `a` onto `b` minimizing summed Euclidean distance.
pub fn emd_matching(a: &PointCloud, b: &PointCloud) -> Result<Vec<usize>> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("EMD needs equal-size clouds, got {} and {}", a.len(), b.len())));
    }
    if a.len() > EMD_MAX_POINTS {
        return Err(Error::invalid(format!("EMD is limited to {EMD_MAX_POINTS} points, got {}", a.len())));
    }
    require_nonempty(a, b)?;
    let (pa, pb) = (a.points(), b.points());
    let cost = CostMatrix::from_fn(pa.len(), pb.len(), |i, j| pa[i].dist(pb[j]))?;
    assignment::solve(&cost)
}

/// Earth Mover's distance: mean matched Euclidean distance under the optimal bijection.
pub fn emd(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    let matching = emd_matching(a, b)?;
    let (pa, pb) = (a.points(), b.points());
    let sum: f64 = matching.iter().enumerate().map(|(i, &j)| pa[i].dist(pb[j])).sum();
    Ok(sum / pa.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    /// Squared meters.
    pub cd: f64,
    /// Meters.
    pub emd: f64,
    /// Meters.
    pub hd: f64,
}

impl DistanceReport {
    /// Requires equal-size clouds (EMD contract).
    pub fn compute(a: &PointCloud, b: &PointCloud) -> Result<Self> {
        Ok(DistanceReport { cd: chamfer(a, b)?, emd: emd(a, b)?, hd: hausdorff(a, b)? })
    }
}

/// `γ·CD + (1−γ)·EMD`, the encoder pre-training target.
pub fn mixed_distance(a: &PointCloud, b: &PointCloud, gamma: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::invalid(format!("mixing weight {gamma} outside [0, 1]")));
    }
    Ok(gamma * chamfer(a, b)? + (1.0 - gamma) * emd(a, b)?)
}
