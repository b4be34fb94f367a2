use std::sync::Arc;

use serde_json::Value;

use super::{
    templates, Assistant, CellProposer, GridGeometry, OccupancyGrid, ProposerSuite, Reply, ShapeGenerator, Terminator,
};
use crate::error::{Error, Result};
use crate::llm::{ask_json, ChatMessage, ChatTransport};

const SYSTEM: &str = "You plan clay sculptures on a voxel grid. Cells are indexed [i, j, k] \
with k the vertical layer; k=0 rests on the table. Every cell with k>0 needs the cell below it \
occupied. Reply with a single JSON object and nothing else.";

struct Shared {
    transport: Arc<dyn ChatTransport>,
    retries: usize,
    batch: usize,
}

impl Shared {
    fn ask<T>(
        &self,
        user: String,
        parse: impl FnMut(&Value) -> std::result::Result<T, String>,
        fallback: T,
    ) -> Result<Reply<T>> {
        let out = ask_json(
            self.transport.as_ref(),
            vec![ChatMessage::system(SYSTEM), ChatMessage::user(user)],
            self.retries,
            parse,
        )?;
        let raw = out.attempts.into_iter().map(|a| a.reply).collect();
        Ok(match out.value {
            Some(value) => Reply { value, raw, exhausted: false },
            None => {
                log::warn!("model replies exhausted; falling back");
                Reply { value: fallback, raw, exhausted: true }
            }
        })
    }
}

fn describe(prompt: &str, grid: &OccupancyGrid) -> String {
    let [nx, ny, nz] = grid.geometry().dims;
    format!("Shape prompt: {prompt}\nGrid {nx}x{ny}x{nz}, 1 = occupied:\n{}", grid.to_text())
}

fn cell_list(key: &'static str) -> impl FnMut(&Value) -> std::result::Result<Vec<[i64; 3]>, String> {
    move |v| {
        let arr = v.get(key).and_then(Value::as_array).ok_or_else(|| format!("missing array '{key}'"))?;
        arr.iter()
            .map(|c| {
                let t = c.as_array().filter(|t| t.len() == 3).ok_or("cells must be [i, j, k]")?;
                let mut out = [0i64; 3];
                for (o, x) in out.iter_mut().zip(t) {
                    *o = x.as_i64().ok_or("cell indices must be integers")?;
                }
                Ok(out)
            })
            .collect()
    }
}

fn flag(key: &'static str) -> impl FnMut(&Value) -> std::result::Result<bool, String> {
    move |v| v.get(key).and_then(Value::as_bool).ok_or_else(|| format!("missing boolean '{key}'"))
}

struct Add(Arc<Shared>);
struct Remove(Arc<Shared>);
struct Done(Arc<Shared>);
struct Confident(Arc<Shared>);

impl CellProposer for Add {
    fn propose(&self, prompt: &str, grid: &OccupancyGrid) -> Result<Reply<Vec<[i64; 3]>>> {
        let q = format!(
            "{}\nName up to {} empty cells to add next, as {{\"add\": [[i, j, k], ...]}}.",
            describe(prompt, grid),
            self.0.batch
        );
        self.0.ask(q, cell_list("add"), Vec::new())
    }
}

impl CellProposer for Remove {
    fn propose(&self, prompt: &str, grid: &OccupancyGrid) -> Result<Reply<Vec<[i64; 3]>>> {
        let q = format!(
            "{}\nName up to {} occupied cells that do not belong to the shape, as \
             {{\"remove\": [[i, j, k], ...]}}. Use an empty list if none.",
            describe(prompt, grid),
            self.0.batch
        );
        self.0.ask(q, cell_list("remove"), Vec::new())
    }
}

impl Terminator for Done {
    fn done(&self, prompt: &str, grid: &OccupancyGrid) -> Result<Reply<bool>> {
        let q = format!(
            "{}\nDoes the grid already depict the shape? Reply {{\"done\": true}} or {{\"done\": false}}.",
            describe(prompt, grid)
        );
        self.0.ask(q, flag("done"), false)
    }
}

impl Assistant for Confident {
    fn confident(&self, prompt: &str) -> Result<Reply<bool>> {
        let q = format!(
            "Shape prompt: {prompt}\nCan you build this shape on the grid cell by cell without \
             a starting shape? Reply {{\"confident\": true}} or {{\"confident\": false}}."
        );
        self.0.ask(q, flag("confident"), false)
    }
}

/// ζ that returns the registered template when one matches and an empty grid
/// otherwise, leaving the proposers to build the shape.
pub struct LenientTemplates;

impl ShapeGenerator for LenientTemplates {
    fn generate(&self, prompt: &str, geometry: GridGeometry) -> Result<OccupancyGrid> {
        match templates::lookup(prompt) {
            Ok(t) => t.grid(geometry),
            Err(Error::UnknownShape { .. }) => {
                log::warn!("no starting shape for {prompt:?}; starting empty");
                Ok(OccupancyGrid::empty(geometry))
            }
            Err(e) => Err(e),
        }
    }
}

/// Proposers backed by a chat model. A reply that never parses degrades to
/// an empty proposal, `done = false`, or `confident = false`.
pub fn language_suite(
    transport: Arc<dyn ChatTransport>,
    retries: usize,
    batch: usize,
    shape_gen: Box<dyn ShapeGenerator>,
) -> ProposerSuite {
    let shared = Arc::new(Shared { transport, retries, batch });
    ProposerSuite {
        add: Box::new(Add(shared.clone())),
        remove: Box::new(Remove(shared.clone())),
        terminate: Box::new(Done(shared.clone())),
        assist: Box::new(Confident(shared)),
        shape_gen,
    }
}
