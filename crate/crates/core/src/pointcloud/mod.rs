//! Point-cloud types and the perception stage: cropping to the workspace,
//! partitioning into regional clusters, ordering, and downsampling.

mod cluster;
pub mod ply;
mod sample;

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub use cluster::{cluster, cluster_with, partition_indices, KMeans, Partitioner};
pub use sample::{downsample, farthest_point_indices};

/// Centroids whose heights differ by at most this much are treated as level.
pub const Z_TIE_EPS: f64 = 1e-3;

/// A point in the workspace frame, meters, z up.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ZERO: Point3 = Point3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn dot(self, o: Point3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist_sq(self, o: Point3) -> f64 {
        (self - o).norm_sq()
    }

    pub fn dist(self, o: Point3) -> f64 {
        self.dist_sq(o).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Point3 {
    fn add_assign(&mut self, o: Point3) {
        *self = *self + o;
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Point3 {
    type Output = Point3;
    fn div(self, s: f64) -> Point3 {
        Point3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

impl Serialize for Point3 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Point3 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let a = <[f64; 3]>::deserialize(d)?;
        Ok(Point3::from(a))
    }
}

/// Arithmetic mean; `None` for an empty slice.
pub fn centroid(points: &[Point3]) -> Option<Point3> {
    if points.is_empty() {
        return None;
    }
    let sum = points.iter().fold(Point3::ZERO, |acc, &p| acc + p);
    Some(sum / points.len() as f64)
}

/// An ordered list of finite points.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
#[serde(transparent)]
pub struct PointCloud {
    points: Vec<Point3>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::invalid(format!("point {i} is not finite")));
        }
        Ok(PointCloud { points })
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point3> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Option<Point3> {
        centroid(&self.points)
    }

    pub fn translated(&self, v: Point3) -> PointCloud {
        PointCloud { points: self.points.iter().map(|&p| p + v).collect() }
    }

    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud { points: indices.iter().map(|&i| self.points[i]).collect() }
    }

    /// Componentwise (min, max) corners; `None` when empty.
    pub fn extent(&self) -> Option<(Point3, Point3)> {
        let first = *self.points.first()?;
        Some(self.points.iter().fold((first, first), |(lo, hi), p| {
            (
                Point3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z)),
                Point3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z)),
            )
        }))
    }
}

impl<'de> Deserialize<'de> for PointCloud {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let points = Vec::<Point3>::deserialize(d)?;
        PointCloud::new(points).map_err(serde::de::Error::custom)
    }
}

impl FromIterator<Point3> for PointCloud {
    fn from_iter<I: IntoIterator<Item = Point3>>(iter: I) -> Self {
        let points: Vec<Point3> = iter.into_iter().collect();
        debug_assert!(points.iter().all(|p| p.is_finite()));
        PointCloud { points }
    }
}

/// Axis-aligned closed box standing in for position thresholding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceBounds {
    min: Point3,
    max: Point3,
}

impl WorkspaceBounds {
    pub fn new(min: Point3, max: Point3) -> Result<Self> {
        if !(min.x < max.x && min.y < max.y && min.z < max.z) {
            return Err(Error::invalid(format!("workspace min {min:?} must be below max {max:?} on every axis")));
        }
        Ok(WorkspaceBounds { min, max })
    }

    pub fn min(&self) -> Point3 {
        self.min
    }

    pub fn max(&self) -> Point3 {
        self.max
    }

    pub fn contains(&self, p: Point3) -> bool {
        (self.min.x..=self.max.x).contains(&p.x)
            && (self.min.y..=self.max.y).contains(&p.y)
            && (self.min.z..=self.max.z).contains(&p.z)
    }
}

/// Keeps the points inside `bounds`. An empty result means the clay left the
/// workspace (or was never there).
pub fn crop(cloud: &PointCloud, bounds: &WorkspaceBounds) -> Result<PointCloud> {
    let points: Vec<Point3> = cloud.points.iter().copied().filter(|&p| bounds.contains(p)).collect();
    if points.is_empty() {
        return Err(Error::NoClayObserved);
    }
    Ok(PointCloud { points })
}

/// One regional patch of the clay.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    id: usize,
    points: PointCloud,
    centroid: Point3,
}

impl Cluster {
    pub fn new(id: usize, points: PointCloud) -> Result<Self> {
        let centroid = points.centroid().ok_or_else(|| Error::invalid("cluster must contain at least one point"))?;
        Ok(Cluster { id, points, centroid })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn points(&self) -> &PointCloud {
        &self.points
    }

    pub fn centroid(&self) -> Point3 {
        self.centroid
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn with_id(mut self, id: usize) -> Self {
        self.id = id;
        self
    }

    /// Same id, new points (centroid recomputed).
    pub fn with_points(&self, points: PointCloud) -> Result<Self> {
        Cluster::new(self.id, points)
    }
}

/// Clusters ordered bottom-up: ids follow centroid (z, x, y).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClusteredCloud {
    clusters: Vec<Cluster>,
}

impl ClusteredCloud {
    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn into_clusters(self) -> Vec<Cluster> {
        self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&Cluster> {
        self.clusters.get(id)
    }

    /// All points, cluster by cluster.
    pub fn flatten(&self) -> PointCloud {
        self.clusters.iter().flat_map(|c| c.points.points.iter().copied()).collect()
    }

    /// Replaces cluster `id` keeping every other cluster (and the id) in place.
    pub fn with_replaced(&self, id: usize, points: PointCloud) -> Result<ClusteredCloud> {
        let mut clusters = self.clusters.clone();
        let slot = clusters.get_mut(id).ok_or_else(|| Error::invalid(format!("cluster id {id} out of range")))?;
        *slot = Cluster::new(id, points)?;
        Ok(ClusteredCloud { clusters })
    }
}

/// Permutation that sorts centroids by z (with `eps` tolerance), then x, then y.
///
/// Centroids are first sorted by z; a level group starts at the lowest remaining
/// centroid and collects every following centroid within `eps` of it. Each group
/// is then sorted by (x, y). Grouping is anchored so the result is a total order.
pub fn ordering_permutation(centroids: &[Point3], eps: f64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..centroids.len()).collect();
    idx.sort_by(|&a, &b| centroids[a].z.total_cmp(&centroids[b].z).then(a.cmp(&b)));
    let mut out = Vec::with_capacity(idx.len());
    let mut start = 0;
    while start < idx.len() {
        let anchor = centroids[idx[start]].z;
        let mut end = start + 1;
        while end < idx.len() && centroids[idx[end]].z - anchor <= eps {
            end += 1;
        }
        let mut group = idx[start..end].to_vec();
        group.sort_by(|&a, &b| {
            let (pa, pb) = (centroids[a], centroids[b]);
            pa.x.total_cmp(&pb.x).then(pa.y.total_cmp(&pb.y)).then(pa.z.total_cmp(&pb.z)).then(a.cmp(&b))
        });
        out.extend(group);
        start = end;
    }
    out
}

/// Sorts clusters bottom-up and relabels ids `0..K`.
pub fn order_clusters(clusters: Vec<Cluster>) -> ClusteredCloud {
    order_clusters_with_eps(clusters, Z_TIE_EPS)
}

pub fn order_clusters_with_eps(clusters: Vec<Cluster>, eps: f64) -> ClusteredCloud {
    let centroids: Vec<Point3> = clusters.iter().map(|c| c.centroid).collect();
    let perm = ordering_permutation(&centroids, eps);
    let mut slots: Vec<Option<Cluster>> = clusters.into_iter().map(Some).collect();
    let clusters = perm
        .into_iter()
        .enumerate()
        .map(|(new_id, old)| slots[old].take().expect("permutation").with_id(new_id))
        .collect();
    ClusteredCloud { clusters }
}

#[derive(Serialize, Deserialize)]
struct ClusterRecord {
    id: usize,
    centroid: Point3,
    points: PointCloud,
}

#[derive(Serialize, Deserialize)]
struct ClusteredRecord {
    clusters: Vec<ClusterRecord>,
}

impl Serialize for ClusteredCloud {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ClusteredRecord {
            clusters: self
                .clusters
                .iter()
                .map(|c| ClusterRecord { id: c.id, centroid: c.centroid, points: c.points.clone() })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ClusteredCloud {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let rec = ClusteredRecord::deserialize(d)?;
        let mut clusters = Vec::with_capacity(rec.clusters.len());
        for (pos, c) in rec.clusters.into_iter().enumerate() {
            if c.id != pos {
                return Err(D::Error::custom(format!("cluster at position {pos} has id {}", c.id)));
            }
            clusters.push(Cluster::new(c.id, c.points).map_err(D::Error::custom)?);
        }
        Ok(ClusteredCloud { clusters })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    fn unit_box() -> WorkspaceBounds {
        WorkspaceBounds::new(Point3::ZERO, Point3::new(1.0, 1.0, 1.0)).unwrap()
    }

    fn single(p: Point3) -> Cluster {
        Cluster::new(0, PointCloud::new(vec![p]).unwrap()).unwrap()
    }

    #[test]
    fn crop_keeps_interior_point() {
        let cloud = PointCloud::new(vec![Point3::new(0.5, 0.5, 0.5)]).unwrap();
        assert_eq!(crop(&cloud, &unit_box()).unwrap(), cloud);
    }

    #[test]
    fn crop_reports_missing_clay() {
        let cloud = PointCloud::new(vec![Point3::new(2.0, 2.0, 2.0)]).unwrap();
        assert!(matches!(crop(&cloud, &unit_box()), Err(Error::NoClayObserved)));
    }

    #[test]
    fn crop_matches_brute_force_filter() {
        let mut rng = crate::seed::rng(11);
        let pts: Vec<Point3> = (0..100)
            .map(|_| Point3::new(rng.random_range(0.0..2.0), rng.random_range(0.0..2.0), rng.random_range(0.0..2.0)))
            .collect();
        let expected = pts.iter().filter(|p| p.x <= 1.0 && p.y <= 1.0 && p.z <= 1.0).count();
        let cloud = PointCloud::new(pts).unwrap();
        assert_eq!(crop(&cloud, &unit_box()).unwrap().len(), expected);
    }

    #[test]
    fn bounds_must_be_ordered() {
        assert!(WorkspaceBounds::new(Point3::ZERO, Point3::new(1.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn non_finite_points_rejected() {
        assert!(PointCloud::new(vec![Point3::new(f64::NAN, 0.0, 0.0)]).is_err());
        assert!(PointCloud::new(vec![Point3::new(0.0, f64::INFINITY, 0.0)]).is_err());
    }

    #[test]
    fn order_puts_lowest_centroid_first() {
        let a = single(Point3::new(0.0, 0.0, 1.0));
        let b = single(Point3::new(0.0, 0.0, 0.0)).with_id(1);
        let ordered = order_clusters(vec![a, b]);
        assert_eq!(ordered.clusters()[0].centroid().z, 0.0);
        assert_eq!(ordered.clusters()[0].id(), 0);
        assert_eq!(ordered.clusters()[1].id(), 1);
    }

    #[test]
    fn level_centroids_order_by_x() {
        let a = single(Point3::new(1.0, 0.0, 0.5));
        let b = single(Point3::new(0.0, 0.0, 0.5)).with_id(1);
        let ordered = order_clusters(vec![a, b]);
        assert_eq!(ordered.clusters()[0].centroid().x, 0.0);
    }

    #[test]
    fn z_within_tolerance_counts_as_level() {
        let a = single(Point3::new(1.0, 0.0, 0.5));
        let b = single(Point3::new(0.0, 0.0, 0.5 + 0.0009));
        let ordered = order_clusters(vec![a, b]);
        assert_eq!(ordered.clusters()[0].centroid().x, 0.0);
    }

    #[test]
    fn ordering_matches_lexicographic_sort() {
        let mut rng = crate::seed::rng(5);
        for _ in 0..50 {
            let cents: Vec<Point3> = (0..10)
                .map(|_| {
                    Point3::new(rng.random_range(0.0..0.1), rng.random_range(0.0..0.1), rng.random_range(0.0..0.1))
                })
                .collect();
            let clusters: Vec<Cluster> = cents.iter().enumerate().map(|(i, &c)| single(c).with_id(i)).collect();
            // Oracle: plain lexicographic sort with exact z comparison, valid whenever
            // no two heights fall within the tie tolerance.
            let mut zs: Vec<f64> = cents.iter().map(|c| c.z).collect();
            zs.sort_by(f64::total_cmp);
            if zs.windows(2).any(|w| w[1] - w[0] <= Z_TIE_EPS) {
                continue;
            }
            let mut oracle = cents.clone();
            oracle.sort_by(|a, b| a.z.total_cmp(&b.z).then(a.x.total_cmp(&b.x)).then(a.y.total_cmp(&b.y)));
            let ordered = order_clusters(clusters);
            let got: Vec<Point3> = ordered.clusters().iter().map(|c| c.centroid()).collect();
            assert_eq!(got, oracle);
        }
    }

    #[test]
    fn clustered_json_round_trip() {
        let a = Cluster::new(0, PointCloud::new(vec![Point3::new(0.0, 0.0, 0.0), Point3::new(0.0, 0.0, 0.2)]).unwrap())
            .unwrap();
        let cc = order_clusters(vec![a, single(Point3::new(0.5, 0.5, 0.5))]);
        let json = serde_json::to_string(&cc).unwrap();
        assert!(json.starts_with(r#"{"clusters":[{"id":0,"centroid":[0.0,0.0,0.1],"points":"#));
        let back: ClusteredCloud = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cc);
    }
}
