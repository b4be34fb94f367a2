//! Static 3-d tree for exact nearest-neighbor distance queries.

use crate::pointcloud::Point3;

const LEAF: usize = 8;

enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: Box<Node>, right: Box<Node> },
}

pub struct KdTree {
    points: Vec<Point3>,
    root: Node,
}

fn coord(p: &Point3, axis: usize) -> f64 {
    match axis {
        0 => p.x,
        1 => p.y,
        _ => p.z,
    }
}

impl KdTree {
    pub fn new(points: &[Point3]) -> Self {
        let mut pts = points.to_vec();
        let n = pts.len();
        let root = build(&mut pts, 0, n);
        KdTree { points: pts, root }
    }

    /// Squared distance from `q` to the closest stored point (`inf` when empty).
    pub fn nearest_dist_sq(&self, q: Point3) -> f64 {
        let mut best = f64::INFINITY;
        self.search(&self.root, q, &mut best);
        best
    }

    fn search(&self, node: &Node, q: Point3, best: &mut f64) {
        match node {
            Node::Leaf { start, end } => {
                for p in &self.points[*start..*end] {
                    let d = q.dist_sq(*p);
                    if d < *best {
                        *best = d;
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = coord(&q, *axis) - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                if diff * diff <= *best {
                    self.search(far, q, best);
                }
            }
        }
    }
}

fn build(pts: &mut [Point3], start: usize, end: usize) -> Node {
    if end - start <= LEAF {
        return Node::Leaf { start, end };
    }
    let slice = &pts[start..end];
    let (lo, hi) = slice.iter().fold(([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]), |(mut lo, mut hi), p| {
        for a in 0..3 {
            lo[a] = lo[a].min(coord(p, a));
            hi[a] = hi[a].max(coord(p, a));
        }
        (lo, hi)
    });
    let axis = (0..3).max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b]))).unwrap_or(0);
    let mid = (end - start) / 2;
    pts[start..end].select_nth_unstable_by(mid, |a, b| coord(a, axis).total_cmp(&coord(b, axis)));
    let value = coord(&pts[start + mid], axis);
    // Everything left of `mid` is <= value, everything right is >= value.
    let left = Box::new(build(pts, start, start + mid));
    let right = Box::new(build(pts, start + mid, end));
    Node::Split { axis, value, left, right }
}
