use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::pointcloud::Point3;

pub const DEFAULT_DIMS: [usize; 3] = [5, 5, 5];
/// Edge length of one grid cell, meters.
pub const DEFAULT_CELL_M: f64 = 0.015;

/// Grid index; `k` is the vertical layer (0 rests on the table).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

impl Cell {
    pub const fn new(i: usize, j: usize, k: usize) -> Self {
        Cell { i, j, k }
    }

    /// The cell directly beneath, if any.
    pub fn below(self) -> Option<Cell> {
        self.k.checked_sub(1).map(|k| Cell { k, ..self })
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.i, self.j, self.k)
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [self.i, self.j, self.k].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Cell {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [i, j, k] = <[usize; 3]>::deserialize(d)?;
        Ok(Cell { i, j, k })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub dims: [usize; 3],
    pub cell_m: f64,
    /// World position of the grid corner at cell (0,0,0), bottom face.
    pub origin: Point3,
}

impl Default for GridGeometry {
    fn default() -> Self {
        GridGeometry { dims: DEFAULT_DIMS, cell_m: DEFAULT_CELL_M, origin: Point3::ZERO }
    }
}

impl GridGeometry {
    pub fn cell_count(&self) -> usize {
        self.dims.iter().product()
    }

    /// Converts a raw proposal index, rejecting anything outside the grid.
    pub fn checked_cell(&self, raw: [i64; 3]) -> Option<Cell> {
        let ok = |v: i64, n: usize| v >= 0 && (v as u64) < n as u64;
        if ok(raw[0], self.dims[0]) && ok(raw[1], self.dims[1]) && ok(raw[2], self.dims[2]) {
            Some(Cell::new(raw[0] as usize, raw[1] as usize, raw[2] as usize))
        } else {
            None
        }
    }

    pub fn contains(&self, c: Cell) -> bool {
        c.i < self.dims[0] && c.j < self.dims[1] && c.k < self.dims[2]
    }

    pub fn cell_center(&self, c: Cell) -> Point3 {
        let h = self.cell_m;
        self.origin + Point3::new((c.i as f64 + 0.5) * h, (c.j as f64 + 0.5) * h, (c.k as f64 + 0.5) * h)
    }

    /// Far corner of the whole grid.
    pub fn extent(&self) -> Point3 {
        self.origin
            + Point3::new(
                self.dims[0] as f64 * self.cell_m,
                self.dims[1] as f64 * self.cell_m,
                self.dims[2] as f64 * self.cell_m,
            )
    }

    fn index(&self, c: Cell) -> usize {
        (c.k * self.dims[1] + c.j) * self.dims[0] + c.i
    }
}

/// Boolean occupancy over a fixed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    geometry: GridGeometry,
    occupied: Vec<bool>,
}

impl OccupancyGrid {
    pub fn empty(geometry: GridGeometry) -> Self {
        OccupancyGrid { occupied: vec![false; geometry.cell_count()], geometry }
    }

    pub fn from_cells(geometry: GridGeometry, cells: impl IntoIterator<Item = Cell>) -> Result<Self> {
        let mut g = OccupancyGrid::empty(geometry);
        for c in cells {
            if !geometry.contains(c) {
                return Err(Error::invalid(format!("cell {c} outside grid {:?}", geometry.dims)));
            }
            g.set(c, true);
        }
        Ok(g)
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn get(&self, c: Cell) -> bool {
        self.geometry.contains(c) && self.occupied[self.geometry.index(c)]
    }

    /// Panics if `c` is outside the grid; proposals are validated before this.
    pub fn set(&mut self, c: Cell, value: bool) {
        assert!(self.geometry.contains(c), "cell {c} outside grid");
        let idx = self.geometry.index(c);
        self.occupied[idx] = value;
    }

    /// Occupied cells ordered by (k, j, i).
    pub fn cells(&self) -> Vec<Cell> {
        let [nx, ny, nz] = self.geometry.dims;
        let mut out = Vec::new();
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let c = Cell::new(i, j, k);
                    if self.get(c) {
                        out.push(c);
                    }
                }
            }
        }
        out
    }

    pub fn count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    /// Occupied cells whose supporting cell is empty.
    pub fn unsupported(&self) -> Vec<Cell> {
        self.cells().into_iter().filter(|c| c.below().is_some_and(|b| !self.get(b))).collect()
    }

    /// Layer-by-layer 0/1 text, `grid[k][j][i]` nesting, as shown to language models.
    pub fn to_text(&self) -> String {
        let [nx, ny, nz] = self.geometry.dims;
        let mut s = String::new();
        for k in 0..nz {
            s.push_str(&format!("layer k={k}:\n"));
            for j in 0..ny {
                let row: Vec<&str> = (0..nx).map(|i| if self.get(Cell::new(i, j, k)) { "1" } else { "0" }).collect();
                s.push_str(&format!("  j={j}: [{}]\n", row.join(", ")));
            }
        }
        s
    }
}
