//! Particle stand-in for real clay. Chunks are dropped into grid cells and
//! deformed by kinematic parallel-jaw squeezes; there are no dynamics.

mod action;
pub mod log;

use rand_distr::{Distribution, Normal, UnitBall};
use serde::{Deserialize, Serialize};

pub use action::{ActionBounds, GraspAction};

use crate::error::{Error, Result};
use crate::planner::{Cell, GridGeometry};
use crate::pointcloud::{Point3, PointCloud};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    /// Particles per placed chunk.
    pub n_chunk: usize,
    /// Chunk ball radius, meters.
    pub r_chunk: f64,
    /// Allowed interpenetration when chunks come to rest, meters.
    pub delta_merge: f64,
    /// Finger extent across the squeeze direction, meters.
    pub finger_width: f64,
    /// Finger extent vertically, meters.
    pub finger_height: f64,
    /// Share of the squeezed volume pushed out into the plane of the fingers.
    pub bulge_beta: f64,
    /// Finger separation before closing; clay farther out along the jaw axis
    /// is never touched.
    pub max_opening: f64,
    pub floor_z: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            n_chunk: 200,
            r_chunk: 0.0075,
            delta_merge: 0.001,
            finger_width: 0.02,
            finger_height: 0.02,
            bulge_beta: 0.5,
            max_opening: 0.035,
            floor_z: 0.0,
        }
    }
}

/// Where a chunk goes: its grid cell and the cell's world center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChunkPlacement {
    pub cell: Cell,
    pub world_center: Point3,
}

impl ChunkPlacement {
    pub fn new(grid: &GridGeometry, cell: Cell) -> Result<Self> {
        if !grid.contains(cell) {
            return Err(Error::invalid(format!("cell {cell} outside grid {:?}", grid.dims)));
        }
        Ok(ChunkPlacement { cell, world_center: grid.cell_center(cell) })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClayBody {
    particles: Vec<Point3>,
    particle_volume: f64,
    placed: Vec<Cell>,
}

impl ClayBody {
    pub fn new(params: &SimParams) -> Self {
        let ball = 4.0 / 3.0 * std::f64::consts::PI * params.r_chunk.powi(3);
        ClayBody { particles: Vec::new(), particle_volume: ball / params.n_chunk as f64, placed: Vec::new() }
    }

    /// A body made of loose particles, e.g. one cluster cut out of a scene.
    pub fn from_particles(particles: Vec<Point3>, params: &SimParams) -> Result<Self> {
        if particles.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("particle positions must be finite"));
        }
        Ok(ClayBody { particles, ..ClayBody::new(params) })
    }

    pub fn particles(&self) -> &[Point3] {
        &self.particles
    }

    pub fn particle_volume(&self) -> f64 {
        self.particle_volume
    }

    pub fn placed_cells(&self) -> &[Cell] {
        &self.placed
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn as_cloud(&self) -> PointCloud {
        self.particles.iter().copied().collect()
    }
}

/// Drops a ball of `n_chunk` particles over the placement's cell and lets it
/// rest on the floor or on whatever clay lies beneath it.
pub fn place_chunk(body: &ClayBody, placement: &ChunkPlacement, params: &SimParams, seed: u64) -> Result<ClayBody> {
    if body.placed.contains(&placement.cell) {
        return Err(Error::invalid(format!("cell {} already holds a chunk", placement.cell)));
    }
    if params.n_chunk == 0 || params.r_chunk <= 0.0 {
        return Err(Error::invalid("chunks need particles and a positive radius"));
    }
    let r = params.r_chunk;
    let mut rng = seed::rng(seed);
    let mut offsets: Vec<Point3> = (0..params.n_chunk).map(|_| Point3::from(UnitBall.sample(&mut rng)) * r).collect();
    // Center the sample exactly so the chunk centroid sits where it rests.
    let mean = crate::pointcloud::centroid(&offsets).unwrap_or_default();
    for o in &mut offsets {
        *o = *o - mean;
    }

    let c = placement.world_center;
    let mut rest_z = params.floor_z + r;
    for p in &body.particles {
        let dx = p.x - c.x;
        let dy = p.y - c.y;
        let d2 = dx * dx + dy * dy;
        if d2 < r * r {
            rest_z = rest_z.max(p.z + (r * r - d2).sqrt() - params.delta_merge);
        }
    }
    let center = Point3::new(c.x, c.y, rest_z);
    let mut next = body.clone();
    next.particles.extend(offsets.into_iter().map(|o| {
        let mut p = center + o;
        p.z = p.z.max(params.floor_z);
        p
    }));
    next.placed.push(placement.cell);
    Ok(next)
}

/// Closes the jaws to `aperture` around the grasp center.
///
/// Particles inside the finger band (between the open fingers along the jaw
/// axis, within half the finger width across it and half the finger height of
/// the grasp center) are pushed along the jaw axis onto the finger planes. The band is then stretched about the jaw
/// axis in the plane orthogonal to it by `1 + β(1/√ρ − 1)`, where ρ is the
/// ratio of mean jaw-axis offset after and before the squeeze. Nothing is
/// pushed below the floor. Particles outside the band do not move.
pub fn apply_grasp(body: &ClayBody, action: &GraspAction, params: &SimParams) -> ClayBody {
    let (sin, cos) = action.rot_z.sin_cos();
    let u = Point3::new(cos, sin, 0.0);
    let v = Point3::new(-sin, cos, 0.0);
    let c = Point3::new(action.x, action.y, action.z);
    let half_gap = action.aperture / 2.0;
    let half_w = params.finger_width / 2.0;
    let half_h = params.finger_height / 2.0;
    let half_open = (params.max_opening / 2.0).max(half_gap);

    let mut band: Vec<(usize, f64, f64, f64)> = Vec::new();
    for (idx, p) in body.particles.iter().enumerate() {
        let d = *p - c;
        let (s, t, h) = (d.dot(u), d.dot(v), d.z);
        if s.abs() <= half_open && t.abs() <= half_w && h.abs() <= half_h {
            band.push((idx, s, t, h));
        }
    }
    let before: f64 = band.iter().map(|b| b.1.abs()).sum();
    let after: f64 = band.iter().map(|b| b.1.abs().min(half_gap)).sum();
    if band.is_empty() || after >= before {
        return body.clone();
    }
    let rho = after / before;
    let stretch = 1.0 + params.bulge_beta * (1.0 / rho.sqrt() - 1.0);

    let mut next = body.clone();
    for (idx, s, t, h) in band {
        let s = s.clamp(-half_gap, half_gap);
        let mut p = c + u * s + v * (t * stretch);
        p.z = (c.z + h * stretch).max(params.floor_z);
        next.particles[idx] = p;
    }
    next
}

/// Particle positions with i.i.d. Gaussian noise on every coordinate.
pub fn observe(body: &ClayBody, noise_sigma: f64, seed: u64) -> Result<PointCloud> {
    if body.is_empty() {
        return Err(Error::InvalidState("nothing to observe: the clay body is empty".into()));
    }
    if noise_sigma == 0.0 {
        return Ok(body.as_cloud());
    }
    let normal =
        Normal::new(0.0, noise_sigma).map_err(|e| Error::invalid(format!("noise sigma {noise_sigma}: {e}")))?;
    let mut rng = seed::rng(seed);
    Ok(body
        .particles
        .iter()
        .map(|p| *p + Point3::new(normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng)))
        .collect())
}
