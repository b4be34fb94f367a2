use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::llm::LlmConfig;
use crate::planner::{GridGeometry, PlannerConfig, DEFAULT_BATCH, DEFAULT_MAX_ITERS};
use crate::pointcloud::{Point3, WorkspaceBounds};
use crate::sim::{ActionBounds, SimParams};
use crate::subgoal::Gains;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerBackend {
    Template,
    Llm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubgoalBackendKind {
    Heuristic,
    Llm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionBackendKind {
    /// Simulated look-ahead over a fixed grasp lattice around the cluster.
    Search,
    /// Trained action model checkpoint.
    Model,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Backends {
    pub planner: PlannerBackend,
    pub subgoal: SubgoalBackendKind,
    pub action: ActionBackendKind,
}

impl Default for Backends {
    fn default() -> Self {
        Backends {
            planner: PlannerBackend::Template,
            subgoal: SubgoalBackendKind::Heuristic,
            action: ActionBackendKind::Search,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Perception {
    pub clusters: usize,
    /// Points kept per cluster before sub-goal and action inference.
    pub points: usize,
    pub noise_sigma: f64,
}

impl Default for Perception {
    fn default() -> Self {
        Perception { clusters: 10, points: 256, noise_sigma: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerSettings {
    pub max_iters: usize,
    pub batch: usize,
}

impl Default for PlannerSettings {
    fn default() -> Self {
        PlannerSettings { max_iters: DEFAULT_MAX_ITERS, batch: DEFAULT_BATCH }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Workspace {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Default for Workspace {
    /// The default grid plus a 1 cm margin, open above.
    fn default() -> Self {
        Workspace { min: [-0.01, -0.01, -0.001], max: [0.085, 0.085, 0.2] }
    }
}

/// Everything one episode needs. Loaded from TOML; missing keys take defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub prompt: String,
    /// Root seed; every random draw derives from it through named substreams.
    pub seed: u64,
    pub max_rounds: usize,
    pub output_dir: PathBuf,
    /// Refuses network-backed backends.
    pub offline: bool,
    pub backends: Backends,
    pub perception: Perception,
    pub workspace: Workspace,
    pub grid: GridGeometry,
    pub planner: PlannerSettings,
    pub sim: SimParams,
    pub gains: Gains,
    pub action_bounds: ActionBounds,
    /// Action model checkpoint, needed by the model backend.
    pub model: Option<PathBuf>,
    pub llm: LlmConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            prompt: String::new(),
            seed: 0,
            max_rounds: 5,
            output_dir: PathBuf::from("out"),
            offline: false,
            backends: Backends::default(),
            perception: Perception::default(),
            workspace: Workspace::default(),
            grid: GridGeometry::default(),
            planner: PlannerSettings::default(),
            sim: SimParams::default(),
            gains: Gains::default(),
            action_bounds: ActionBounds::default(),
            model: None,
            llm: LlmConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        // Relative paths in the file are relative to the file.
        if let Some(dir) = path.parent() {
            if let Some(m) = cfg.model.as_mut().filter(|m| m.is_relative()) {
                *m = dir.join(&*m);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn planner_config(&self) -> PlannerConfig {
        PlannerConfig { max_iters: self.planner.max_iters, batch: self.planner.batch, geometry: self.grid }
    }

    pub fn workspace_bounds(&self) -> Result<WorkspaceBounds> {
        WorkspaceBounds::new(Point3::from(self.workspace.min), Point3::from(self.workspace.max))
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn uses_network(&self) -> bool {
        self.backends.planner == PlannerBackend::Llm || self.backends.subgoal == SubgoalBackendKind::Llm
    }

    /// Checks everything that can be checked before an episode starts.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.prompt.trim().is_empty() {
            return bad("prompt is empty".into());
        }
        if self.offline && self.uses_network() {
            return bad("offline mode forbids the llm planner and sub-goal backends".into());
        }
        if self.perception.clusters == 0 || self.perception.points == 0 {
            return bad("perception needs at least one cluster and one point per cluster".into());
        }
        if !(self.perception.noise_sigma >= 0.0) {
            return bad("noise_sigma must be non-negative".into());
        }
        if self.planner.batch == 0 {
            return bad("planner batch must be at least 1".into());
        }
        if self.grid.dims.contains(&0) || !(self.grid.cell_m > 0.0) {
            return bad("grid needs positive dims and cell size".into());
        }
        if self.sim.n_chunk == 0 || !(self.sim.r_chunk > 0.0) {
            return bad("simulator needs particles and a positive chunk radius".into());
        }
        ActionBounds::new(self.action_bounds.min, self.action_bounds.max).map_err(|e| Error::Config(e.to_string()))?;
        self.workspace_bounds()?;
        if self.backends.action == ActionBackendKind::Model {
            match &self.model {
                None => return bad("the model action backend needs `model = <checkpoint>`".into()),
                Some(p) if !p.is_file() => return bad(format!("model checkpoint {} not found", p.display())),
                Some(_) => {}
            }
        }
        Ok(())
    }
}
