//! Soft segment planning: proposers iteratively add and remove cells of an
//! occupancy grid, and the result is ordered into a placeable chunk sequence.

mod grid;
mod language;
mod templates;

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pointcloud::Point3;
use crate::sim::ChunkPlacement;

pub use grid::{Cell, GridGeometry, OccupancyGrid, DEFAULT_CELL_M, DEFAULT_DIMS};
pub use language::{language_suite, LenientTemplates};
pub use templates::{lookup as lookup_template, template_names, Template};

/// Cells changed per add or remove call.
pub const DEFAULT_BATCH: usize = 3;
pub const DEFAULT_MAX_ITERS: usize = 50;

/// A proposer's answer with the raw model replies behind it (empty for
/// deterministic backends).
#[derive(Debug, Clone, PartialEq)]
pub struct Reply<T> {
    pub value: T,
    pub raw: Vec<String>,
    /// Every attempt failed to parse and `value` is the fallback.
    pub exhausted: bool,
}

impl<T> Reply<T> {
    pub fn direct(value: T) -> Self {
        Reply { value, raw: Vec::new(), exhausted: false }
    }
}

/// σ (add) or φ (remove). Cells are raw indices and are validated by the caller.
pub trait CellProposer {
    fn propose(&self, prompt: &str, grid: &OccupancyGrid) -> Result<Reply<Vec<[i64; 3]>>>;
}

/// θ: is the grid finished?
pub trait Terminator {
    fn done(&self, prompt: &str, grid: &OccupancyGrid) -> Result<Reply<bool>>;
}

/// γ_a: can the proposers build this prompt without a generated starting shape?
pub trait Assistant {
    fn confident(&self, prompt: &str) -> Result<Reply<bool>>;
}

/// ζ: prompt to a starting occupancy.
pub trait ShapeGenerator {
    fn generate(&self, prompt: &str, geometry: GridGeometry) -> Result<OccupancyGrid>;
}

pub struct ProposerSuite {
    pub add: Box<dyn CellProposer>,
    pub remove: Box<dyn CellProposer>,
    pub terminate: Box<dyn Terminator>,
    pub assist: Box<dyn Assistant>,
    pub shape_gen: Box<dyn ShapeGenerator>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Sigma,
    Phi,
    Theta,
    Gamma,
    Zeta,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditRecord {
    pub call: usize,
    pub iter: Option<usize>,
    pub role: Role,
    /// Occupied cells the proposer saw.
    pub input: Vec<Cell>,
    pub raw_replies: Vec<String>,
    pub parsed: serde_json::Value,
    pub accepted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementPlan {
    pub geometry: GridGeometry,
    pub placements: Vec<ChunkPlacement>,
}

#[derive(Serialize, Deserialize)]
struct GridHeader {
    dims: [usize; 3],
    cell_m: f64,
    #[serde(default)]
    origin: Point3,
}

#[derive(Serialize, Deserialize)]
struct PlanFile {
    grid: GridHeader,
    placements: Vec<Cell>,
}

impl PlacementPlan {
    pub fn cells(&self) -> Vec<Cell> {
        self.placements.iter().map(|p| p.cell).collect()
    }

    pub fn len(&self) -> usize {
        self.placements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.placements.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        let f = PlanFile {
            grid: GridHeader { dims: self.geometry.dims, cell_m: self.geometry.cell_m, origin: self.geometry.origin },
            placements: self.cells(),
        };
        Ok(serde_json::to_string_pretty(&f)?)
    }

    /// Parses and re-validates a plan file; placements must be in placeable order.
    pub fn from_json(text: &str) -> Result<Self> {
        let f: PlanFile = serde_json::from_str(text)?;
        let geometry = GridGeometry { dims: f.grid.dims, cell_m: f.grid.cell_m, origin: f.grid.origin };
        if !(geometry.cell_m > 0.0) || geometry.dims.contains(&0) {
            return Err(Error::Format { what: "plan", detail: "grid needs positive dims and cell size".into() });
        }
        let grid = OccupancyGrid::from_cells(geometry, f.placements.iter().copied())?;
        if let Some(bad) = first_prefix_violation(&f.placements) {
            return Err(Error::Format { what: "plan", detail: format!("cell {bad} placed before its support") });
        }
        if grid.count() != f.placements.len() {
            return Err(Error::Format { what: "plan", detail: "duplicate placements".into() });
        }
        let placements = f.placements.into_iter().map(|c| ChunkPlacement::new(&geometry, c)).collect::<Result<_>>()?;
        Ok(PlacementPlan { geometry, placements })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// First cell in `order` whose supporting cell has not appeared before it.
pub fn first_prefix_violation(order: &[Cell]) -> Option<Cell> {
    let mut placed = HashSet::new();
    for &c in order {
        if c.below().is_some_and(|b| !placed.contains(&b)) {
            return Some(c);
        }
        placed.insert(c);
    }
    None
}

/// Orders `raw_plan` so every cell follows the cell beneath it, keeping raw
/// order wherever support allows.
pub fn validate_and_order(grid_final: &OccupancyGrid, raw_plan: &[Cell]) -> Result<PlacementPlan> {
    let geometry = *grid_final.geometry();
    let raw_set: HashSet<Cell> = raw_plan.iter().copied().collect();
    let grid_cells = grid_final.cells();
    if raw_set.len() != raw_plan.len()
        || raw_set.len() != grid_cells.len()
        || grid_cells.iter().any(|c| !raw_set.contains(c))
    {
        return Err(Error::invalid("raw plan cells do not match the final grid"));
    }
    let unsupported = grid_final.unsupported();
    if !unsupported.is_empty() {
        return Err(Error::PlanningFailure { cells: unsupported });
    }
    let mut pending: Vec<Cell> = raw_plan.to_vec();
    let mut placed: HashSet<Cell> = HashSet::new();
    let mut ordered = Vec::with_capacity(pending.len());
    while !pending.is_empty() {
        let pos = pending
            .iter()
            .position(|c| c.below().is_none_or(|b| placed.contains(&b)))
            .expect("supported grid always has a placeable cell");
        let c = pending.remove(pos);
        placed.insert(c);
        ordered.push(ChunkPlacement::new(&geometry, c)?);
    }
    Ok(PlacementPlan { geometry, placements: ordered })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub max_iters: usize,
    pub batch: usize,
    pub geometry: GridGeometry,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig { max_iters: DEFAULT_MAX_ITERS, batch: DEFAULT_BATCH, geometry: GridGeometry::default() }
    }
}

#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub plan: PlacementPlan,
    pub grid: OccupancyGrid,
    pub audit: Vec<AuditRecord>,
    pub iterations: usize,
}

impl PlanOutcome {
    pub fn audit_jsonl(&self) -> Result<String> {
        let mut s = String::new();
        for r in &self.audit {
            s.push_str(&serde_json::to_string(r)?);
            s.push('\n');
        }
        Ok(s)
    }
}

struct Auditor {
    records: Vec<AuditRecord>,
}

impl Auditor {
    fn push(
        &mut self,
        iter: Option<usize>,
        role: Role,
        grid: &OccupancyGrid,
        raw: Vec<String>,
        parsed: serde_json::Value,
        verdict: std::result::Result<(), String>,
    ) {
        if let Err(reason) = &verdict {
            log::warn!("{role:?} proposal rejected: {reason}");
        }
        self.records.push(AuditRecord {
            call: self.records.len(),
            iter,
            role,
            input: grid.cells(),
            raw_replies: raw,
            parsed,
            accepted: verdict.is_ok(),
            reason: verdict.err(),
        });
    }
}

/// Checks a raw proposal; the whole batch is rejected on the first bad cell.
fn check_proposal(
    raw: &[[i64; 3]],
    grid: &OccupancyGrid,
    adding: bool,
    batch: usize,
) -> std::result::Result<Vec<Cell>, String> {
    if raw.len() > batch {
        return Err(format!("{} cells exceed the batch limit {batch}", raw.len()));
    }
    let mut seen = HashSet::new();
    let mut cells = Vec::with_capacity(raw.len());
    for &r in raw {
        let c = grid.geometry().checked_cell(r).ok_or_else(|| format!("cell {r:?} outside the grid"))?;
        if !seen.insert(c) {
            return Err(format!("cell {c} proposed twice"));
        }
        if adding && grid.get(c) {
            return Err(format!("cell {c} already occupied"));
        }
        if !adding && !grid.get(c) {
            return Err(format!("cell {c} is not occupied"));
        }
        cells.push(c);
    }
    Ok(cells)
}

/// Runs the add/remove loop and orders the result.
///
/// Without a confident assistant the grid and running plan start from ζ.
/// Iterations then alternate σ (even) and φ (odd) until θ reports done or
/// `max_iters` is spent. A rejected proposal leaves the grid alone but still
/// uses its iteration.
pub fn plan(prompt: &str, suite: &ProposerSuite, config: &PlannerConfig) -> Result<PlanOutcome> {
    if prompt.trim().is_empty() {
        return Err(Error::invalid("shape prompt is empty"));
    }
    if config.max_iters == 0 {
        return Err(Error::invalid("max_iters must be at least 1"));
    }
    let mut grid = OccupancyGrid::empty(config.geometry);
    let mut os: Vec<Cell> = Vec::new();
    let mut audit = Auditor { records: Vec::new() };

    let help = suite.assist.confident(prompt)?;
    audit.push(None, Role::Gamma, &grid, help.raw, help.value.into(), Ok(()));
    if !help.value {
        grid = suite.shape_gen.generate(prompt, config.geometry)?;
        os = grid.cells();
        audit.push(None, Role::Zeta, &grid, Vec::new(), serde_json::to_value(&os)?, Ok(()));
    }

    let mut iterations = 0;
    for iter in 0..config.max_iters {
        let done = suite.terminate.done(prompt, &grid)?;
        audit.push(Some(iter), Role::Theta, &grid, done.raw, done.value.into(), Ok(()));
        if done.value {
            break;
        }
        iterations += 1;
        let adding = iter % 2 == 0;
        let (proposer, role) = if adding { (&suite.add, Role::Sigma) } else { (&suite.remove, Role::Phi) };
        let reply = proposer.propose(prompt, &grid)?;
        let parsed = serde_json::to_value(&reply.value)?;
        let snapshot = grid.clone();
        let verdict = check_proposal(&reply.value, &grid, adding, config.batch).map(|cells| {
            for c in cells {
                grid.set(c, adding);
                if adding {
                    os.push(c);
                } else {
                    os.retain(|&o| o != c);
                }
            }
        });
        audit.push(Some(iter), role, &snapshot, reply.raw, parsed, verdict);
    }

    let plan = validate_and_order(&grid, &os)?;
    Ok(PlanOutcome { plan, grid, audit: audit.records, iterations })
}

/// σ/φ entries of an audit log alternate starting with σ.
pub fn alternation_holds(audit: &[AuditRecord]) -> bool {
    audit
        .iter()
        .filter(|r| matches!(r.role, Role::Sigma | Role::Phi))
        .enumerate()
        .all(|(n, r)| r.role == if n % 2 == 0 { Role::Sigma } else { Role::Phi })
}

struct TemplateAdd(Template, usize);
struct TemplateRemove(Template, usize);
struct TemplateDone(Template);
struct TemplateAssist(Template);
struct TemplateShapes;

impl CellProposer for TemplateAdd {
    fn propose(&self, _: &str, grid: &OccupancyGrid) -> Result<Reply<Vec<[i64; 3]>>> {
        let mut missing: Vec<Cell> = self.0.cells.iter().copied().filter(|&c| !grid.get(c)).collect();
        missing.sort_by_key(|c| (c.k, c.i, c.j));
        Ok(Reply::direct(missing.into_iter().take(self.1).map(raw_index).collect()))
    }
}

impl CellProposer for TemplateRemove {
    fn propose(&self, _: &str, grid: &OccupancyGrid) -> Result<Reply<Vec<[i64; 3]>>> {
        let target: HashSet<Cell> = self.0.cells.iter().copied().collect();
        // Highest first, so removals never strand a cell above.
        let mut extra: Vec<Cell> = grid.cells().into_iter().filter(|c| !target.contains(c)).collect();
        extra.sort_by_key(|c| (std::cmp::Reverse(c.k), c.i, c.j));
        Ok(Reply::direct(extra.into_iter().take(self.1).map(raw_index).collect()))
    }
}

impl Terminator for TemplateDone {
    fn done(&self, _: &str, grid: &OccupancyGrid) -> Result<Reply<bool>> {
        let target = self.0.grid(*grid.geometry())?;
        Ok(Reply::direct(&target == grid))
    }
}

impl Assistant for TemplateAssist {
    fn confident(&self, _: &str) -> Result<Reply<bool>> {
        Ok(Reply::direct(!self.0.complex))
    }
}

impl ShapeGenerator for TemplateShapes {
    fn generate(&self, prompt: &str, geometry: GridGeometry) -> Result<OccupancyGrid> {
        templates::lookup(prompt)?.grid(geometry)
    }
}

fn raw_index(c: Cell) -> [i64; 3] {
    [c.i as i64, c.j as i64, c.k as i64]
}

/// Deterministic proposers that build the prompt's registered template.
pub fn template_backend(prompt: &str, batch: usize) -> Result<ProposerSuite> {
    let t = templates::lookup(prompt)?;
    Ok(ProposerSuite {
        add: Box::new(TemplateAdd(t.clone(), batch)),
        remove: Box::new(TemplateRemove(t.clone(), batch)),
        terminate: Box::new(TemplateDone(t.clone())),
        assist: Box::new(TemplateAssist(t)),
        shape_gen: Box::new(TemplateShapes),
    })
}

/// The template lookup as a stand-alone ζ.
pub fn template_shapes() -> Box<dyn ShapeGenerator> {
    Box::new(TemplateShapes)
}
