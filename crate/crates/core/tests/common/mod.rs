//! Brute-force reference for the trap-tube rules, written against an explicit
//! cell map and cell sets rather than the library's geometry helpers.

#![allow(dead_code)]

use std::collections::{HashMap, HashSet, VecDeque};

use traptube::env::{Food, Kinematics, TubeEnd, TubeSpec};
use traptube::rng::Stream;
use traptube::{Action, Direction, GridSize, Orientation, Position, TaskConfig, ToolPose};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cell {
    Open,
    Wall,
    Trap,
    Exit,
}

pub type Rc = (i32, i32);

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RefState {
    pub agent: Rc,
    pub tool: Vec<Rc>,
    /// `None` once the food is in the trap.
    pub food: Option<Rc>,
}

pub struct RefSim {
    pub rows: i32,
    pub cols: i32,
    pub map: HashMap<Rc, Cell>,
    pub horizon: u32,
    pub terminate_on_trap: bool,
    pub start: RefState,
}

fn delta(d: Direction) -> Rc {
    match d {
        Direction::Up => (-1, 0),
        Direction::Down => (1, 0),
        Direction::Left => (0, -1),
        Direction::Right => (0, 1),
    }
}

fn add(a: Rc, d: Rc) -> Rc {
    (a.0 + d.0, a.1 + d.1)
}

fn rc(p: Position) -> Rc {
    (p.row as i32, p.col as i32)
}

/// Interior cells, plus the two hole cells as `(trap, exit)`.
fn tube_cells(t: &TubeSpec) -> (Vec<Rc>, Rc, Rc) {
    let r0 = t.interior_anchor.row as i32;
    let c0 = t.interior_anchor.col as i32;
    let (len, thick) = (t.interior_length as i32, t.lateral_thickness as i32);
    let mut interior = Vec::new();
    // lane k, position i along the axis
    let cell = |k: i32, i: i32| match t.axis {
        Orientation::Horizontal => (r0 + k, c0 + i),
        Orientation::Vertical => (r0 + i, c0 + k),
    };
    for k in 0..thick {
        for i in 0..len {
            interior.push(cell(k, i));
        }
    }
    let lane = t.hole_lane as i32;
    let low = cell(lane, -1);
    let high = cell(lane, len);
    match t.trap_end {
        TubeEnd::Negative => (interior, low, high),
        TubeEnd::Positive => (interior, high, low),
    }
}

pub fn tool_cells(t: ToolPose) -> Vec<Rc> {
    let a = rc(t.anchor);
    (0..t.length as i32)
        .map(|i| match t.orientation {
            Orientation::Horizontal => (a.0, a.1 + i),
            Orientation::Vertical => (a.0 + i, a.1),
        })
        .collect()
}

impl RefSim {
    pub fn new(config: &TaskConfig) -> Self {
        let rows = config.grid.rows as i32;
        let cols = config.grid.cols as i32;
        let mut map = HashMap::new();
        for r in 0..rows {
            for c in 0..cols {
                map.insert((r, c), Cell::Open);
            }
        }
        let (interior, trap, exit) = tube_cells(&config.tube);
        let inside: HashSet<Rc> = interior.iter().copied().collect();
        for &cell in &interior {
            for d in Direction::ALL {
                let n = add(cell, delta(d));
                if !inside.contains(&n) && map.contains_key(&n) {
                    map.insert(n, Cell::Wall);
                }
            }
        }
        if map.contains_key(&trap) {
            map.insert(trap, Cell::Trap);
        }
        if map.contains_key(&exit) {
            map.insert(exit, Cell::Exit);
        }
        RefSim {
            rows,
            cols,
            map,
            horizon: config.horizon,
            terminate_on_trap: config.terminate_on_trap,
            start: RefState {
                agent: rc(config.agent_start),
                tool: tool_cells(config.tool),
                food: Some(rc(config.food_start)),
            },
        }
    }

    pub fn at(&self, p: Rc) -> Option<Cell> {
        self.map.get(&p).copied()
    }

    fn can_stand(&self, p: Rc) -> bool {
        self.at(p) == Some(Cell::Open)
    }

    pub fn success(s: &RefState) -> bool {
        s.food == Some(s.agent)
    }

    /// The state after `action`, or an identical copy when it is blocked.
    pub fn next(&self, s: &RefState, action: Action) -> RefState {
        self.try_next(s, action).unwrap_or_else(|| s.clone())
    }

    fn try_next(&self, s: &RefState, action: Action) -> Option<RefState> {
        let m = delta(action.movement);
        let agent = add(s.agent, m);
        if !s.tool.contains(&add(s.agent, delta(action.grasp))) {
            if !self.can_stand(agent) || s.tool.contains(&agent) {
                return None;
            }
            return Some(RefState { agent, ..s.clone() });
        }
        if !self.can_stand(agent) {
            return None;
        }
        let tool: Vec<Rc> = s.tool.iter().map(|&c| add(c, m)).collect();
        for &c in &tool {
            match self.at(c) {
                None | Some(Cell::Wall) => return None,
                _ => {}
            }
        }
        let blocked = |p: Rc| tool.contains(&p) || p == agent;
        let food = match s.food {
            Some(f) if tool.contains(&f) => {
                let f1 = add(f, m);
                if blocked(f1) {
                    return None;
                }
                match self.at(f1)? {
                    Cell::Wall => return None,
                    Cell::Trap => None,
                    Cell::Open => Some(f1),
                    Cell::Exit => {
                        let f2 = add(f1, m);
                        if !self.can_stand(f2) || blocked(f2) {
                            return None;
                        }
                        Some(f2)
                    }
                }
            }
            other => other,
        };
        Some(RefState { agent, tool, food })
    }

    /// `(next, reward, done)` for a state reached after `steps` actions.
    pub fn step(&self, s: &RefState, steps: u32, action: Action) -> (RefState, u8, bool) {
        let n = self.next(s, action);
        let won = Self::success(&n);
        let done = won || steps + 1 >= self.horizon || (self.terminate_on_trap && n.food.is_none());
        (n, won as u8, done)
    }

    /// Every state reachable from the start, expanding trapped states too but
    /// not successful ones.
    pub fn reachable(&self) -> Vec<RefState> {
        let mut seen = HashSet::from([self.start.clone()]);
        let mut order = vec![self.start.clone()];
        let mut queue = VecDeque::from([self.start.clone()]);
        while let Some(s) = queue.pop_front() {
            if Self::success(&s) {
                continue;
            }
            for a in Action::ALL {
                let n = self.next(&s, a);
                if seen.insert(n.clone()) {
                    order.push(n.clone());
                    queue.push_back(n);
                }
            }
        }
        order
    }

    /// Whether some action sequence of length at most `depth` succeeds, by
    /// expanding the full set of states at each depth.
    pub fn solvable_within(&self, depth: u32) -> bool {
        let mut layer = HashSet::from([self.start.clone()]);
        if Self::success(&self.start) {
            return true;
        }
        for _ in 0..depth {
            let mut next = HashSet::new();
            for s in &layer {
                if s.food.is_none() {
                    continue;
                }
                for a in Action::ALL {
                    let n = self.next(s, a);
                    if Self::success(&n) {
                        return true;
                    }
                    next.insert(n);
                }
            }
            layer = next;
        }
        false
    }

    /// Shortest successful length up to `max_depth` by iterative deepening.
    /// The table records the largest remaining budget a state has been
    /// explored with in the current iteration.
    pub fn iddfs(&self, max_depth: u32) -> Option<u32> {
        for limit in 0..=max_depth {
            let mut table: HashMap<RefState, u32> = HashMap::new();
            if self.dfs(&self.start, limit, &mut table) {
                return Some(limit);
            }
        }
        None
    }

    fn dfs(&self, s: &RefState, budget: u32, table: &mut HashMap<RefState, u32>) -> bool {
        if Self::success(s) {
            return true;
        }
        if budget == 0 || s.food.is_none() {
            return false;
        }
        match table.get(s) {
            Some(&b) if b >= budget => return false,
            _ => {}
        }
        table.insert(s.clone(), budget);
        Action::ALL
            .iter()
            .any(|&a| self.dfs(&self.next(s, a), budget - 1, table))
    }
}

pub fn from_kinematics(k: &Kinematics) -> RefState {
    RefState {
        agent: rc(k.agent),
        tool: tool_cells(k.tool),
        food: match k.food {
            Food::At(p) => Some(rc(p)),
            Food::Trapped => None,
        },
    }
}

pub fn to_kinematics(s: &RefState, tool: ToolPose) -> Kinematics {
    let pos = |p: Rc| Position::new(p.0 as u8, p.1 as u8);
    Kinematics {
        agent: pos(s.agent),
        tool: ToolPose {
            anchor: pos(*s.tool.iter().min().expect("tool has cells")),
            ..tool
        },
        food: s.food.map_or(Food::Trapped, |f| Food::At(pos(f))),
    }
}

/// A 6×6 task: a one-cell interior at (2,3) with the trap on its left and
/// the exit on its right, a two-cell tool just left of the trap and the agent
/// at the row start.
pub fn mini_config() -> TaskConfig {
    let mut c = traptube::base_config();
    c.grid = GridSize::square(6);
    c.tube = TubeSpec {
        axis: Orientation::Horizontal,
        interior_anchor: Position::new(2, 3),
        interior_length: 1,
        lateral_thickness: 1,
        trap_end: TubeEnd::Negative,
        hole_lane: 0,
    };
    c.food_start = Position::new(2, 3);
    c.tool = ToolPose {
        anchor: Position::new(4, 1),
        orientation: Orientation::Horizontal,
        length: 2,
    };
    c.agent_start = Position::new(5, 0);
    c
}

/// Random small task on a 6×6 or 7×7 grid that passes the consistency checks.
pub fn random_small_config(rng: &mut Stream, horizon: u32) -> TaskConfig {
    loop {
        let mut c = traptube::base_config();
        let side = 6 + rng.below(2) as u8;
        c.grid = GridSize::square(side);
        c.horizon = horizon;
        let len = 1 + rng.below(2) as u8;
        let thick = 1 + rng.below(2) as u8;
        let axis = if rng.below(2) == 0 {
            Orientation::Horizontal
        } else {
            Orientation::Vertical
        };
        let a0 = 1 + rng.below((side - len - 1) as u64) as u8;
        let l0 = 1 + rng.below((side - thick - 1) as u64) as u8;
        let anchor = match axis {
            Orientation::Horizontal => Position::new(l0, a0),
            Orientation::Vertical => Position::new(a0, l0),
        };
        c.tube = TubeSpec {
            axis,
            interior_anchor: anchor,
            interior_length: len,
            lateral_thickness: thick,
            trap_end: if rng.below(2) == 0 {
                TubeEnd::Negative
            } else {
                TubeEnd::Positive
            },
            hole_lane: rng.below(thick as u64) as u8,
        };
        let lane = c.tube.hole_lane_cells();
        c.food_start = if rng.below(2) == 0 {
            Position::new(rng.below(side as u64) as u8, rng.below(side as u64) as u8)
        } else {
            lane[rng.index(lane.len())]
        };
        let length = 2 + rng.below(2) as u8;
        c.tool = ToolPose {
            anchor: Position::new(rng.below(side as u64) as u8, rng.below(side as u64) as u8),
            orientation: if rng.below(2) == 0 {
                Orientation::Horizontal
            } else {
                Orientation::Vertical
            },
            length,
        };
        c.agent_start = Position::new(rng.below(side as u64) as u8, rng.below(side as u64) as u8);
        if traptube::Dynamics::new(&c).is_ok() {
            return c;
        }
    }
}
