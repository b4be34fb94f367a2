//! Shape-similarity metrics, action error, and rating statistics.

pub mod assignment;
mod distance;
pub mod nn;
mod stats;

pub use distance::{
    chamfer, chamfer_directed, emd, emd_matching, hausdorff, hausdorff_directed, mixed_distance, DistanceReport,
    EMD_MAX_POINTS,
};
pub use stats::{
    krippendorff_alpha, ln_gamma, regularized_incomplete_beta, student_t_two_sided, welch_t, Level, RatingMatrix,
    WelchResult,
};

use crate::error::{Error, Result};
use crate::pointcloud::PointCloud;

/// Mean squared error between two equal-length vectors.
pub fn mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::invalid(format!(
            "MSE needs equal non-empty lengths, got {} and {}",
            pred.len(),
            target.len()
        )));
    }
    let s: f64 = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(s / pred.len() as f64)
}

/// Text-conditioned shape score (CLIP-style). No implementation ships; the
/// trait marks where an external scorer plugs into the reports.
pub trait Scorer {
    fn name(&self) -> &str;
    fn score(&self, cloud: &PointCloud, text: &str) -> Result<f64>;
}
