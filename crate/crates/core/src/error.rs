use std::fmt;

use thiserror::Error;

use crate::grid::{ObjectCategory, Position};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ColorError {
    #[error("point is not unit length (norm {norm})")]
    NotUnit { norm: f64 },
    #[error("color is not on the feature sphere (|2c-1| = {norm})")]
    NotOnManifold { norm: f64 },
    #[error("{0} cannot be a symbol partner")]
    InvalidPartner(ObjectCategory),
}

/// One broken invariant of a task configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    UnsupportedSchema(u32),
    GridTooSmall,
    HorizonZero,
    TubeOutOfBounds,
    TubeDegenerate,
    HoleLaneOutOfRange,
    ToolTooShort(u8),
    ToolOutOfBounds,
    ToolOverlapsWall(Position),
    ToolOverlapsFood,
    ToolOverlapsAgent,
    AgentOutOfBounds,
    AgentOnStructure(Position),
    AgentInsideTube,
    AgentOnFood,
    FoodOutOfBounds,
    FoodOnStructure(Position),
    ColorOutOfRange(ObjectCategory),
    ToolOutOfReach,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnsupportedSchema(v) => write!(f, "unsupported schema version {v}"),
            Violation::GridTooSmall => f.write_str("grid must be at least 3x3 and at most 16x16"),
            Violation::HorizonZero => f.write_str("horizon must be at least 1"),
            Violation::TubeOutOfBounds => f.write_str("tube walls or end caps leave the grid"),
            Violation::TubeDegenerate => {
                f.write_str("tube needs interior length >= 1 and lateral thickness 1 or 2")
            }
            Violation::HoleLaneOutOfRange => f.write_str("hole lane outside the tube interior"),
            Violation::ToolTooShort(n) => write!(f, "tool length {n} is below 2"),
            Violation::ToolOutOfBounds => f.write_str("tool leaves the grid"),
            Violation::ToolOverlapsWall(p) => write!(f, "tool overlaps tube wall at {p}"),
            Violation::ToolOverlapsFood => f.write_str("tool overlaps the food"),
            Violation::ToolOverlapsAgent => f.write_str("tool overlaps the agent"),
            Violation::AgentOutOfBounds => f.write_str("agent outside the grid"),
            Violation::AgentOnStructure(p) => write!(f, "agent starts on a tube cell at {p}"),
            Violation::AgentInsideTube => f.write_str("agent starts inside the tube interior"),
            Violation::AgentOnFood => f.write_str("agent starts on the food"),
            Violation::FoodOutOfBounds => f.write_str("food outside the grid"),
            Violation::FoodOnStructure(p) => write!(f, "food starts on a tube cell at {p}"),
            Violation::ColorOutOfRange(c) => write!(f, "{c} color has a channel outside [0,1]"),
            Violation::ToolOutOfReach => f.write_str("agent cannot reach the tool"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid task configuration: {}", list(.violations))]
pub struct ConfigError {
    pub violations: Vec<Violation>,
}

fn list(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(Violation::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl ConfigError {
    pub fn single(v: Violation) -> Self {
        ConfigError {
            violations: vec![v],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("episode already finished")]
    EpisodeFinished,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{sampler} sampler gave up after {attempts} rejected draws")]
pub struct GenerationExhausted {
    pub sampler: &'static str,
    pub attempts: u32,
}
