//! Coarse-to-fine clay sculpting in simulation: segment planning on an
//! occupancy grid, clustered point-cloud perception, geometric sub-goals, a
//! learned grasp action model, and the metrics used to evaluate them.

pub mod error;
pub mod llm;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod planner;
pub mod pointcloud;
pub mod seed;
pub mod sim;
pub mod subgoal;

pub use error::{Error, Result};
