use rand::Rng as _;

use super::{Cluster, Point3};
use crate::error::{Error, Result};
use crate::seed;

/// Farthest-point sampling. A seeded random anchor picks the start: the first
/// selected point is the one farthest from the anchor, so the start always
/// lies on the hull of the input. Each later pick maximizes the distance to
/// everything selected so far. Returns indices in selection order.
pub fn farthest_point_indices(points: &[Point3], n: usize, seed: u64) -> Result<Vec<usize>> {
    if n > points.len() {
        return Err(Error::invalid(format!("cannot downsample {} points to {n}", points.len())));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut rng = seed::rng(seed);
    let anchor = points[rng.random_range(0..points.len())];
    let start = argmax_unselected(points.iter().map(|p| p.dist_sq(anchor)), &[]);

    let mut selected = vec![false; points.len()];
    let mut min_d: Vec<f64> = vec![f64::INFINITY; points.len()];
    let mut out = Vec::with_capacity(n);
    let mut current = start;
    loop {
        selected[current] = true;
        out.push(current);
        if out.len() == n {
            break;
        }
        let c = points[current];
        for (d, p) in min_d.iter_mut().zip(points) {
            *d = d.min(p.dist_sq(c));
        }
        current = argmax_unselected(min_d.iter().copied(), &selected);
    }
    Ok(out)
}

fn argmax_unselected(dists: impl Iterator<Item = f64>, selected: &[bool]) -> usize {
    let mut best = usize::MAX;
    let mut best_d = f64::NEG_INFINITY;
    for (i, d) in dists.enumerate() {
        if selected.get(i).copied().unwrap_or(false) {
            continue;
        }
        if d > best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Reduces a cluster to `n` of its own points (same id).
pub fn downsample(cluster: &Cluster, n: usize, seed: u64) -> Result<Cluster> {
    if n == 0 {
        return Err(Error::invalid("downsample target must be positive"));
    }
    if n == cluster.len() {
        return Ok(cluster.clone());
    }
    let idx = farthest_point_indices(cluster.points().points(), n, seed)?;
    cluster.with_points(cluster.points().select(&idx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointcloud::PointCloud;

    fn random_cluster(n: usize, seed_: u64) -> Cluster {
        let mut rng = seed::rng(seed_);
        let pts = (0..n).map(|_| Point3::new(rng.random(), rng.random(), rng.random())).collect();
        Cluster::new(0, PointCloud::new(pts).unwrap()).unwrap()
    }

    #[test]
    fn output_is_subset_of_input() {
        let c = random_cluster(512, 1);
        let d = downsample(&c, 256, 3).unwrap();
        assert_eq!(d.len(), 256);
        for p in d.points().points() {
            assert!(c.points().points().contains(p));
        }
        let idx = farthest_point_indices(c.points().points(), 256, 3).unwrap();
        let mut uniq = idx.clone();
        uniq.sort_unstable();
        uniq.dedup();
        assert_eq!(uniq.len(), 256);
    }

    #[test]
    fn full_size_is_identity() {
        let c = random_cluster(40, 2);
        assert_eq!(downsample(&c, 40, 0).unwrap(), c);
        // The sampler itself visits every point exactly once at n = len.
        let mut idx = farthest_point_indices(c.points().points(), 40, 0).unwrap();
        idx.sort_unstable();
        assert_eq!(idx, (0..40).collect::<Vec<_>>());
    }

    #[test]
    fn line_segment_pair_is_the_extreme_pair() {
        let mut rng = seed::rng(4);
        let mut ts: Vec<f64> = (0..300).map(|_| rng.random::<f64>()).collect();
        let pts: Vec<Point3> = ts.iter().map(|&t| Point3::new(t, 2.0 * t, -t)).collect();
        ts.sort_by(f64::total_cmp);
        let (lo, hi) = (ts[0], ts[299]);
        for s in 0..20 {
            let idx = farthest_point_indices(&pts, 2, s).unwrap();
            let mut got = [pts[idx[0]].x, pts[idx[1]].x];
            got.sort_by(f64::total_cmp);
            assert_eq!(got, [lo, hi], "seed {s}");
        }
    }

    #[test]
    fn too_few_points_is_invalid() {
        let c = random_cluster(10, 1);
        assert!(downsample(&c, 11, 0).is_err());
    }

    #[test]
    fn duplicates_are_still_distinct_indices() {
        let pts = vec![Point3::ZERO; 8];
        let mut idx = farthest_point_indices(&pts, 8, 0).unwrap();
        idx.sort_unstable();
        assert_eq!(idx, (0..8).collect::<Vec<_>>());
    }
}
