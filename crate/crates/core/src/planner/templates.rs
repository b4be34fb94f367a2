use super::grid::{Cell, GridGeometry, OccupancyGrid};
use crate::error::{Error, Result};

/// A named target occupancy on the default 5×5×5 grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub name: &'static str,
    /// Shapes the template planner does not build alone; these start from the
    /// full target instead of growing it cell by cell.
    pub complex: bool,
    pub cells: Vec<Cell>,
}

const NAMES: [&str; 9] = ["x", "line", "column", "flower", "pyramid", "cube", "airplane", "chair", "pottery"];

pub fn template_names() -> Vec<String> {
    NAMES.iter().map(|s| s.to_string()).collect()
}

fn cells_for(name: &str) -> Option<(bool, Vec<Cell>)> {
    let c = Cell::new;
    let mut v = Vec::new();
    let complex = match name {
        "x" => {
            for i in 0..5 {
                v.push(c(i, i, 0));
                if i != 2 {
                    v.push(c(i, 4 - i, 0));
                }
            }
            false
        }
        "line" => {
            v.extend((0..5).map(|j| c(2, j, 0)));
            false
        }
        "column" => {
            v.extend((0..4).map(|k| c(2, 2, k)));
            false
        }
        "flower" => {
            v.extend((0..5).map(|j| c(2, j, 0)));
            v.extend([0, 1, 3, 4].map(|i| c(i, 2, 0)));
            v.push(c(2, 2, 1));
            true
        }
        "pyramid" => {
            for (k, lo, hi) in [(0, 0, 4), (1, 1, 3), (2, 2, 2)] {
                for j in lo..=hi {
                    for i in lo..=hi {
                        v.push(c(i, j, k));
                    }
                }
            }
            true
        }
        "cube" => {
            for k in 0..3 {
                for j in 1..4 {
                    for i in 1..4 {
                        v.push(c(i, j, k));
                    }
                }
            }
            true
        }
        "airplane" => {
            v.extend((0..5).map(|j| c(2, j, 0)));
            v.extend([0, 1, 3, 4].map(|i| c(i, 1, 0)));
            v.extend([c(1, 4, 0), c(3, 4, 0), c(2, 1, 1)]);
            true
        }
        "chair" => {
            for k in 0..2 {
                for j in 1..4 {
                    for i in 1..4 {
                        v.push(c(i, j, k));
                    }
                }
            }
            for k in 2..4 {
                v.extend((1..4).map(|i| c(i, 3, k)));
            }
            true
        }
        "pottery" => {
            v.push(c(2, 2, 0));
            for k in 0..3 {
                for j in 1..4 {
                    for i in 1..4 {
                        if (i, j) != (2, 2) {
                            v.push(c(i, j, k));
                        }
                    }
                }
            }
            true
        }
        _ => return None,
    };
    Some((complex, v))
}

/// Resolves a prompt to a template by its first word that names one.
pub fn lookup(prompt: &str) -> Result<Template> {
    let lowered = prompt.to_lowercase();
    let words: Vec<&str> = lowered.split(|ch: char| !ch.is_alphanumeric()).filter(|w| !w.is_empty()).collect();
    for w in &words {
        let singular = w.strip_suffix('s').unwrap_or(w);
        for name in NAMES {
            if *w == name || singular == name {
                let (complex, cells) = cells_for(name).expect("registered");
                return Ok(Template { name, complex, cells });
            }
        }
    }
    Err(Error::UnknownShape { prompt: prompt.to_string(), known: template_names() })
}

impl Template {
    pub fn grid(&self, geometry: GridGeometry) -> Result<OccupancyGrid> {
        OccupancyGrid::from_cells(geometry, self.cells.iter().copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn every_template_is_supported_and_unique() {
        for name in NAMES {
            let t = lookup(name).unwrap();
            let set: HashSet<Cell> = t.cells.iter().copied().collect();
            assert_eq!(set.len(), t.cells.len(), "{name} has duplicates");
            let g = t.grid(GridGeometry::default()).unwrap();
            assert!(g.unsupported().is_empty(), "{name} floats");
        }
    }

    #[test]
    fn known_shapes() {
        assert_eq!(lookup("pyramid").unwrap().cells.len(), 35);
        assert_eq!(lookup("X").unwrap().cells.len(), 9);
        let line = lookup("a line").unwrap();
        assert_eq!(line.cells, (0..5).map(|j| Cell::new(2, j, 0)).collect::<Vec<_>>());
        assert!(!lookup("column").unwrap().complex);
        assert!(lookup("Chairs").unwrap().complex);
        let err = lookup("warbleflarb").unwrap_err();
        assert!(matches!(err, Error::UnknownShape { ref known, .. } if known.len() == 9));
    }
}
