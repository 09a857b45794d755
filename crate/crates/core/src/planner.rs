//! Exact breadth-first search over the deterministic dynamics.
//!
//! A search node is a [`SearchKey`]: agent cell, tool anchor and orientation,
//! and the food's status. The step counter is not part of the key because
//! the dynamics are time-invariant; the horizon is a depth cutoff instead.
//! Visited keys live in a dense bitset indexed by
//! `(agent * cells + tool_anchor) * (cells + 2) + food_code`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Action, Dynamics, Food, Kinematics};
use crate::error::ConfigError;
use crate::grid::{Direction, GridSize, Orientation, Position};
use crate::task::TaskConfig;

/// Food status as seen by the search.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FoodKey {
    At(Position),
    Trapped,
    Collected,
}

/// Canonical search state. Equal keys have identical futures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SearchKey {
    pub agent: Position,
    pub tool_anchor: Position,
    pub tool_orientation: Orientation,
    pub food: FoodKey,
}

impl SearchKey {
    pub fn of(k: &Kinematics) -> Self {
        let food = match k.food {
            Food::Trapped => FoodKey::Trapped,
            Food::At(p) if p == k.agent => FoodKey::Collected,
            Food::At(p) => FoodKey::At(p),
        };
        SearchKey {
            agent: k.agent,
            tool_anchor: k.tool.anchor,
            tool_orientation: k.tool.orientation,
            food,
        }
    }

    /// 8 bits each for agent row/col and tool row/col, 1 orientation bit,
    /// then an 18-bit food code: `row << 8 | col`, `0x10000` trapped,
    /// `0x20000` collected.
    pub fn pack(self) -> u64 {
        let food = match self.food {
            FoodKey::At(p) => (p.row as u64) << 8 | p.col as u64,
            FoodKey::Trapped => 0x1_0000,
            FoodKey::Collected => 0x2_0000,
        };
        (self.agent.row as u64) << 48
            | (self.agent.col as u64) << 40
            | (self.tool_anchor.row as u64) << 32
            | (self.tool_anchor.col as u64) << 24
            | ((self.tool_orientation == Orientation::Vertical) as u64) << 18
            | food
    }
}

/// A shortest action sequence from the initial state to success.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub actions: Vec<Action>,
    pub length: usize,
}

impl Plan {
    fn new(actions: Vec<Action>) -> Self {
        let length = actions.len();
        Plan { actions, length }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlannerError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("more than {cap} reachable states (stopped after {partial})")]
    CapExceeded { cap: usize, partial: usize },
}

struct Visited {
    bits: Vec<u64>,
    cells: usize,
}

impl Visited {
    fn new(grid: GridSize) -> Self {
        let cells = grid.cell_count();
        let total = cells * cells * (cells + 2);
        Visited {
            bits: vec![0; total.div_ceil(64)],
            cells,
        }
    }

    #[inline]
    fn slot(&self, grid: GridSize, k: &Kinematics) -> usize {
        let food = match k.food {
            Food::Trapped => self.cells,
            Food::At(p) if p == k.agent => self.cells + 1,
            Food::At(p) => grid.index(p),
        };
        (grid.index(k.agent) * self.cells + grid.index(k.tool.anchor)) * (self.cells + 2) + food
    }

    /// Marks the key; returns whether it was new.
    #[inline]
    fn insert(&mut self, slot: usize) -> bool {
        let word = &mut self.bits[slot / 64];
        let mask = 1u64 << (slot % 64);
        let fresh = *word & mask == 0;
        *word |= mask;
        fresh
    }
}

struct Node {
    state: Kinematics,
    parent: u32,
    action: u8,
}

/// Shortest plan within `max_depth` actions, or `None`.
pub fn search(dynamics: &Dynamics, max_depth: u32) -> Option<Plan> {
    let grid = dynamics.grid();
    let start = dynamics.initial();
    if start.success() {
        return Some(Plan::new(Vec::new()));
    }
    let mut visited = Visited::new(grid);
    visited.insert(visited.slot(grid, &start));
    let mut nodes = vec![Node {
        state: start,
        parent: u32::MAX,
        action: 0,
    }];
    let mut layer = 0..1;
    for _ in 0..max_depth {
        let end = nodes.len();
        for i in layer.clone() {
            let state = nodes[i].state;
            if state.food == Food::Trapped {
                continue;
            }
            for (a, &action) in Action::ALL.iter().enumerate() {
                let next = dynamics.transition(state, action);
                if !visited.insert(visited.slot(grid, &next)) {
                    continue;
                }
                nodes.push(Node {
                    state: next,
                    parent: i as u32,
                    action: a as u8,
                });
                if next.success() {
                    return Some(Plan::new(unwind(&nodes, nodes.len() - 1)));
                }
            }
        }
        if nodes.len() == end {
            break;
        }
        layer = end..nodes.len();
    }
    None
}

fn unwind(nodes: &[Node], mut i: usize) -> Vec<Action> {
    let mut actions = Vec::new();
    while nodes[i].parent != u32::MAX {
        actions.push(Action::ALL[nodes[i].action as usize]);
        i = nodes[i].parent as usize;
    }
    actions.reverse();
    actions
}

/// Shortest successful plan within the task horizon.
pub fn solve(config: &TaskConfig) -> Result<Option<Plan>, ConfigError> {
    let dynamics = Dynamics::new(config)?;
    Ok(search(&dynamics, config.horizon))
}

/// Cells the agent can walk to from its start, treating the tool and the
/// food as obstacles.
fn walk_region(config: &TaskConfig) -> Option<(GridSize, Vec<bool>)> {
    let dynamics = Dynamics::new(config).ok()?;
    let grid = config.grid;
    let mut seen = vec![false; grid.cell_count()];
    let open = |p: Position| {
        dynamics.cell(p).walkable() && !config.tool.contains(p) && p != config.food_start
    };
    let mut queue = VecDeque::from([config.agent_start]);
    seen[grid.index(config.agent_start)] = true;
    while let Some(p) = queue.pop_front() {
        for d in Direction::ALL {
            if let Some(q) = grid.step(p, d) {
                if !seen[grid.index(q)] && open(q) {
                    seen[grid.index(q)] = true;
                    queue.push_back(q);
                }
            }
        }
    }
    Some((grid, seen))
}

/// Whether plain moves can bring the agent onto `target`.
pub fn reachable(config: &TaskConfig, target: Position) -> bool {
    walk_region(config)
        .is_some_and(|(grid, seen)| grid.contains(target) && seen[grid.index(target)])
}

/// Whether plain moves can bring the agent next to some tool cell.
pub fn tool_in_reach(config: &TaskConfig) -> bool {
    let Some((grid, seen)) = walk_region(config) else {
        return false;
    };
    config.tool.cells().any(|t| {
        Direction::ALL
            .iter()
            .filter_map(|&d| grid.step(t, d))
            .any(|q| seen[grid.index(q)])
    })
}

/// Counts every distinct search key reachable from the initial state, with no
/// depth limit. Success states are counted but not expanded.
pub fn enumerate_reachable(config: &TaskConfig, cap: usize) -> Result<usize, PlannerError> {
    let dynamics = Dynamics::new(config)?;
    let grid = dynamics.grid();
    let mut visited = Visited::new(grid);
    let start = dynamics.initial();
    visited.insert(visited.slot(grid, &start));
    let mut queue = VecDeque::from([start]);
    let mut count = 1;
    while let Some(state) = queue.pop_front() {
        if state.success() {
            continue;
        }
        for action in Action::ALL {
            let next = dynamics.transition(state, action);
            if visited.insert(visited.slot(grid, &next)) {
                count += 1;
                if count > cap {
                    return Err(PlannerError::CapExceeded {
                        cap,
                        partial: count,
                    });
                }
                queue.push_back(next);
            }
        }
    }
    Ok(count)
}
