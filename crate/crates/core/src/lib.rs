//! Deterministic trap-tube gridworld.
//!
//! The crate is organised bottom-up:
//!
//! - [`grid`]: coordinates, categories, colors and the color sphere.
//! - [`env`]: the MDP itself, with [`env::Dynamics`] as the pure transition function.
//! - [`render`]: observation tensors and PPM export.
//! - [`task`]: task configurations, the base task and the three transfer samplers.
//! - [`planner`]: exact breadth-first search used to certify and solve tasks.
//! - [`agent`]: the agent interface with random and planner-replay agents.
//! - [`protocol`]: newline-delimited JSON sessions for external learners.
//! - [`harness`]: episodes, evaluation over transfer sets, reports and traces.

pub mod agent;
pub mod env;
pub mod error;
pub mod grid;
pub mod harness;
pub mod json;
pub mod planner;
pub mod protocol;
pub mod render;
pub mod rng;
pub mod task;

pub use agent::{Agent, AgentError, AgentObservation, PlannerAgent, RandomAgent};
pub use env::{
    Action, Dynamics, EnvState, Food, StepResult, ToolPose, TrapTube, TubeEnd, TubeSpec,
};
pub use error::{ColorError, ConfigError, EnvError, GenerationExhausted, Violation};
pub use grid::{
    CellColor, Direction, GridSize, ObjectCategory, Orientation, Palette, Position, SymbolMap,
};
pub use harness::{EpisodeResult, EvalReport};
pub use planner::{Plan, SearchKey};
pub use render::Observation;
pub use task::{base_config, sample_task, Provenance, TaskConfig, TransferSet};
