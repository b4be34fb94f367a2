use rand::Rng as _;

use super::{order_clusters, Cluster, ClusteredCloud, Point3, PointCloud};
use crate::error::{Error, Result};
use crate::seed;

/// Assigns every point to one of `k` groups. The returned labels index groups
/// in an arbitrary order; callers relabel with [`order_clusters`].
pub trait Partitioner {
    fn partition(&self, points: &[Point3], k: usize) -> Result<Vec<usize>>;
}

/// Lloyd iterations from a k-means++ start.
#[derive(Debug, Clone, Copy)]
pub struct KMeans {
    pub seed: u64,
    pub max_iters: usize,
    /// Convergence threshold on the largest centroid shift, meters.
    pub tol: f64,
}

impl KMeans {
    pub fn new(seed: u64) -> Self {
        KMeans { seed, max_iters: 100, tol: 1e-6 }
    }

    fn init_plus_plus(&self, points: &[Point3], k: usize) -> Vec<Point3> {
        let mut rng = seed::rng(self.seed);
        let mut centers = Vec::with_capacity(k);
        centers.push(points[rng.random_range(0..points.len())]);
        let mut d2: Vec<f64> = points.iter().map(|p| p.dist_sq(centers[0])).collect();
        while centers.len() < k {
            let total: f64 = d2.iter().sum();
            let next = if total > 0.0 {
                let mut target = rng.random::<f64>() * total;
                let mut pick = points.len() - 1;
                for (i, &w) in d2.iter().enumerate() {
                    if target < w {
                        pick = i;
                        break;
                    }
                    target -= w;
                }
                pick
            } else {
                // Every point coincides with a center; any choice is equivalent.
                rng.random_range(0..points.len())
            };
            let c = points[next];
            centers.push(c);
            for (d, p) in d2.iter_mut().zip(points) {
                *d = d.min(p.dist_sq(c));
            }
        }
        centers
    }
}

fn nearest(p: Point3, centers: &[Point3]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centers.iter().enumerate() {
        let d = p.dist_sq(*c);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

impl Partitioner for KMeans {
    fn partition(&self, points: &[Point3], k: usize) -> Result<Vec<usize>> {
        if k == 0 {
            return Err(Error::invalid("cluster count must be positive"));
        }
        if points.len() < k {
            return Err(Error::invalid(format!("cannot form {k} clusters from {} points", points.len())));
        }
        let mut centers = self.init_plus_plus(points, k);
        let mut labels = vec![0usize; points.len()];
        for _ in 0..self.max_iters {
            for (l, p) in labels.iter_mut().zip(points) {
                *l = nearest(*p, &centers);
            }
            let mut sums = vec![Point3::ZERO; k];
            let mut counts = vec![0usize; k];
            for (l, p) in labels.iter().zip(points) {
                sums[*l] += *p;
                counts[*l] += 1;
            }
            // An empty group takes over the point farthest from its own center.
            for j in 0..k {
                if counts[j] == 0 {
                    let (far, _) = points
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| counts[labels[*i]] > 1)
                        .map(|(i, p)| (i, p.dist_sq(centers[labels[i]])))
                        .fold((usize::MAX, -1.0), |acc, (i, d)| if d > acc.1 { (i, d) } else { acc });
                    let old = labels[far];
                    counts[old] -= 1;
                    sums[old] = sums[old] - points[far];
                    labels[far] = j;
                    counts[j] = 1;
                    sums[j] = points[far];
                }
            }
            let mut shift: f64 = 0.0;
            for j in 0..k {
                let c = sums[j] / counts[j] as f64;
                shift = shift.max(c.dist(centers[j]));
                centers[j] = c;
            }
            if shift < self.tol {
                break;
            }
        }
        // Final assignment against the converged centers, keeping groups non-empty.
        let mut final_labels: Vec<usize> = points.iter().map(|p| nearest(*p, &centers)).collect();
        let mut counts = vec![0usize; k];
        for l in &final_labels {
            counts[*l] += 1;
        }
        if counts.iter().all(|&c| c > 0) {
            labels = std::mem::take(&mut final_labels);
        }
        Ok(labels)
    }
}

/// Member indices of each group, ordered bottom-up like [`ClusteredCloud`] ids.
pub fn partition_indices(cloud: &PointCloud, k: usize, partitioner: &dyn Partitioner) -> Result<Vec<Vec<usize>>> {
    let labels = partitioner.partition(cloud.points(), k)?;
    let mut groups = vec![Vec::new(); k];
    for (i, l) in labels.into_iter().enumerate() {
        groups[l].push(i);
    }
    let centroids: Vec<Point3> = groups
        .iter()
        .map(|g| super::centroid(&g.iter().map(|&i| cloud.points()[i]).collect::<Vec<_>>()).unwrap_or_default())
        .collect();
    let perm = super::ordering_permutation(&centroids, super::Z_TIE_EPS);
    Ok(perm.into_iter().map(|j| std::mem::take(&mut groups[j])).collect())
}

/// Partitions `cloud` into `k` ordered regional clusters with seeded k-means.
pub fn cluster(cloud: &PointCloud, k: usize, seed: u64) -> Result<ClusteredCloud> {
    cluster_with(cloud, k, &KMeans::new(seed))
}

pub fn cluster_with(cloud: &PointCloud, k: usize, partitioner: &dyn Partitioner) -> Result<ClusteredCloud> {
    let groups = partition_indices(cloud, k, partitioner)?;
    let clusters =
        groups.iter().enumerate().map(|(id, g)| Cluster::new(id, cloud.select(g))).collect::<Result<Vec<_>>>()?;
    Ok(order_clusters(clusters))
}
