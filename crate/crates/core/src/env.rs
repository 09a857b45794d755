//! The trap-tube MDP: layout, deterministic transitions, reward and termination.
//!
//! Dynamics read object categories only. Palettes and symbol maps affect
//! rendering and nothing else, so two tasks that share a geometry behave
//! identically step for step.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{ConfigError, EnvError, Violation};
use crate::grid::{Direction, GridSize, ObjectCategory, Orientation, Position};
use crate::task::{validate_config, TaskConfig, SCHEMA_VERSION};

/// Default number of actions per episode.
pub const HORIZON: u32 = 50;

/// A grasp direction paired with a move direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Action {
    pub grasp: Direction,
    #[serde(rename = "move")]
    pub movement: Direction,
}

impl Action {
    /// All 16 actions, grasp-major in `Up, Down, Left, Right` order.
    pub const ALL: [Action; 16] = {
        let mut out = [Action {
            grasp: Direction::Up,
            movement: Direction::Up,
        }; 16];
        let mut i = 0;
        while i < 16 {
            out[i] = Action {
                grasp: Direction::ALL[i / 4],
                movement: Direction::ALL[i % 4],
            };
            i += 1;
        }
        out
    };

    pub const fn new(grasp: Direction, movement: Direction) -> Self {
        Action { grasp, movement }
    }

    pub const fn index(self) -> usize {
        self.grasp.index() * 4 + self.movement.index()
    }

    pub fn from_index(index: usize) -> Option<Action> {
        Action::ALL.get(index).copied()
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "grasp {} / move {}", self.grasp, self.movement)
    }
}

/// A straight, rigid tool. The anchor is its minimum-row, minimum-col cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ToolPose {
    pub anchor: Position,
    pub orientation: Orientation,
    pub length: u8,
}

impl ToolPose {
    pub fn cells(self) -> impl Iterator<Item = Position> {
        let ToolPose {
            anchor,
            orientation,
            length,
        } = self;
        (0..length).map(move |i| match orientation {
            Orientation::Horizontal => Position::new(anchor.row, anchor.col.wrapping_add(i)),
            Orientation::Vertical => Position::new(anchor.row.wrapping_add(i), anchor.col),
        })
    }

    #[inline]
    pub fn contains(self, pos: Position) -> bool {
        match self.orientation {
            Orientation::Horizontal => {
                pos.row == self.anchor.row
                    && pos.col >= self.anchor.col
                    && (pos.col - self.anchor.col) < self.length
            }
            Orientation::Vertical => {
                pos.col == self.anchor.col
                    && pos.row >= self.anchor.row
                    && (pos.row - self.anchor.row) < self.length
            }
        }
    }

    pub fn in_bounds(self, grid: GridSize) -> bool {
        let far = self.length as u16 - 1;
        match self.orientation {
            Orientation::Horizontal => {
                self.anchor.row < grid.rows && self.anchor.col as u16 + far < grid.cols as u16
            }
            Orientation::Vertical => {
                self.anchor.col < grid.cols && self.anchor.row as u16 + far < grid.rows as u16
            }
        }
    }

    /// The pose translated one cell, if it stays on the grid.
    #[inline]
    pub fn shifted(self, dir: Direction, grid: GridSize) -> Option<ToolPose> {
        let (dr, dc) = dir.delta();
        let row = self.anchor.row as i16 + dr as i16;
        let col = self.anchor.col as i16 + dc as i16;
        if row < 0 || col < 0 {
            return None;
        }
        let moved = ToolPose {
            anchor: Position::new(row as u8, col as u8),
            ..self
        };
        moved.in_bounds(grid).then_some(moved)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TubeEnd {
    Negative,
    Positive,
}

/// What a tube contributes to a cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TubeCell {
    Outside,
    Interior,
    Wall,
    Trap,
    Exit,
}

impl TubeCell {
    /// Cells the agent may stand on.
    #[inline]
    pub fn walkable(self) -> bool {
        matches!(self, TubeCell::Outside | TubeCell::Interior)
    }

    pub fn category(self) -> ObjectCategory {
        match self {
            TubeCell::Outside | TubeCell::Interior => ObjectCategory::Ground,
            TubeCell::Wall => ObjectCategory::TubeWall,
            TubeCell::Trap => ObjectCategory::Trap,
            TubeCell::Exit => ObjectCategory::Exit,
        }
    }
}

/// Tube geometry.
///
/// The interior spans `interior_length` cells along `axis` and
/// `lateral_thickness` lanes across it, starting at `interior_anchor`.
/// The two end caps sit one cell past either axial end of the interior. On
/// the hole lane the caps are the trap and the exit; on other lanes they are
/// wall. Each lateral side of the interior is lined with wall. The cells
/// diagonal to the interior corners are not part of the tube.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TubeSpec {
    pub axis: Orientation,
    pub interior_anchor: Position,
    pub interior_length: u8,
    pub lateral_thickness: u8,
    pub trap_end: TubeEnd,
    pub hole_lane: u8,
}

impl TubeSpec {
    /// `(axial, lateral)` coordinates of a cell.
    #[inline]
    fn frame(&self, pos: Position) -> (i16, i16) {
        match self.axis {
            Orientation::Horizontal => (pos.col as i16, pos.row as i16),
            Orientation::Vertical => (pos.row as i16, pos.col as i16),
        }
    }

    fn unframe(&self, axial: i16, lateral: i16) -> Option<Position> {
        let (row, col) = match self.axis {
            Orientation::Horizontal => (lateral, axial),
            Orientation::Vertical => (axial, lateral),
        };
        if (0..=255).contains(&row) && (0..=255).contains(&col) {
            Some(Position::new(row as u8, col as u8))
        } else {
            None
        }
    }

    fn origin(&self) -> (i16, i16) {
        self.frame(self.interior_anchor)
    }

    /// Axial coordinate of the trap cap and the exit cap.
    fn cap_axials(&self) -> (i16, i16) {
        let (a0, _) = self.origin();
        let low = a0 - 1;
        let high = a0 + self.interior_length as i16;
        match self.trap_end {
            TubeEnd::Negative => (low, high),
            TubeEnd::Positive => (high, low),
        }
    }

    fn hole_lateral(&self) -> i16 {
        self.origin().1 + self.hole_lane as i16
    }

    /// Direction that carries food from the trap side towards the exit.
    pub fn exit_direction(&self) -> Direction {
        match (self.axis, self.trap_end) {
            (Orientation::Horizontal, TubeEnd::Negative) => Direction::Right,
            (Orientation::Horizontal, TubeEnd::Positive) => Direction::Left,
            (Orientation::Vertical, TubeEnd::Negative) => Direction::Down,
            (Orientation::Vertical, TubeEnd::Positive) => Direction::Up,
        }
    }

    pub fn trap_cell(&self) -> Option<Position> {
        self.unframe(self.cap_axials().0, self.hole_lateral())
    }

    pub fn exit_cell(&self) -> Option<Position> {
        self.unframe(self.cap_axials().1, self.hole_lateral())
    }

    #[inline]
    pub fn classify(&self, pos: Position) -> TubeCell {
        let (a, l) = self.frame(pos);
        let (a0, l0) = self.origin();
        let len = self.interior_length as i16;
        let thick = self.lateral_thickness as i16;
        let in_axial = a >= a0 && a < a0 + len;
        let in_lateral = l >= l0 && l < l0 + thick;
        if in_axial && in_lateral {
            return TubeCell::Interior;
        }
        if in_lateral && (a == a0 - 1 || a == a0 + len) {
            if l != self.hole_lateral() {
                return TubeCell::Wall;
            }
            let (trap, _) = self.cap_axials();
            return if a == trap {
                TubeCell::Trap
            } else {
                TubeCell::Exit
            };
        }
        if in_axial && (l == l0 - 1 || l == l0 + thick) {
            return TubeCell::Wall;
        }
        TubeCell::Outside
    }

    /// Every cell that belongs to the tube: interior, walls, trap and exit.
    /// Coordinates that fall off the `u8` range are skipped.
    pub fn cells(&self) -> Vec<(Position, TubeCell)> {
        let (a0, l0) = self.origin();
        let len = self.interior_length as i16;
        let thick = self.lateral_thickness as i16;
        let mut out = Vec::new();
        for a in (a0 - 1)..=(a0 + len) {
            for l in (l0 - 1)..=(l0 + thick) {
                if let Some(p) = self.unframe(a, l) {
                    let kind = self.classify(p);
                    if kind != TubeCell::Outside {
                        out.push((p, kind));
                    }
                }
            }
        }
        out
    }

    pub fn well_formed(&self) -> bool {
        self.interior_length >= 1 && (1..=2).contains(&self.lateral_thickness)
    }

    /// Whether every tube cell lies on `grid`.
    pub fn fits(&self, grid: GridSize) -> bool {
        let (a0, l0) = self.origin();
        let len = self.interior_length as i16;
        let thick = self.lateral_thickness as i16;
        let (axial_max, lateral_max) = match self.axis {
            Orientation::Horizontal => (grid.cols as i16, grid.rows as i16),
            Orientation::Vertical => (grid.rows as i16, grid.cols as i16),
        };
        a0 > 0 && a0 + len < axial_max && l0 > 0 && l0 + thick < lateral_max
    }

    /// Interior cells of the hole lane, ordered from the trap end to the exit end.
    pub fn hole_lane_cells(&self) -> Vec<Position> {
        let (a0, _) = self.origin();
        let l = self.hole_lateral();
        let mut cells: Vec<Position> = (0..self.interior_length as i16)
            .filter_map(|i| self.unframe(a0 + i, l))
            .collect();
        if self.trap_end == TubeEnd::Positive {
            cells.reverse();
        }
        cells
    }
}

/// Where the food is.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Food {
    At(Position),
    Trapped,
}

impl Food {
    pub fn position(self) -> Option<Position> {
        match self {
            Food::At(p) => Some(p),
            Food::Trapped => None,
        }
    }
}

impl Serialize for Food {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Food::At(p) => p.serialize(s),
            Food::Trapped => s.serialize_str("trapped"),
        }
    }
}

impl<'de> Deserialize<'de> for Food {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            At(Position),
            Tag(String),
        }
        match Raw::deserialize(d)? {
            Raw::At(p) => Ok(Food::At(p)),
            Raw::Tag(t) if t == "trapped" => Ok(Food::Trapped),
            Raw::Tag(t) => Err(serde::de::Error::custom(format!(
                "expected a position or \"trapped\", got {t:?}"
            ))),
        }
    }
}

/// Positions of everything that moves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Kinematics {
    pub agent: Position,
    pub tool: ToolPose,
    pub food: Food,
}

impl Kinematics {
    #[inline]
    pub fn success(&self) -> bool {
        self.food == Food::At(self.agent)
    }
}

/// Full simulation state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EnvState {
    pub agent: Position,
    pub tool: ToolPose,
    pub food: Food,
    pub tube: TubeSpec,
    pub step_count: u32,
    pub done: bool,
}

impl EnvState {
    pub fn kinematics(&self) -> Kinematics {
        Kinematics {
            agent: self.agent,
            tool: self.tool,
            food: self.food,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepResult {
    pub state: EnvState,
    pub reward: u8,
    pub done: bool,
}

/// True iff the agent stands on the food.
pub fn is_success(state: &EnvState) -> bool {
    state.kinematics().success()
}

/// Consistency checks every simulated state relies on: bounds and overlap.
/// Reachability and appearance are checked by [`validate_config`].
pub(crate) fn consistency_violations(config: &TaskConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let grid = config.grid;
    if config.schema_version != SCHEMA_VERSION {
        out.push(Violation::UnsupportedSchema(config.schema_version));
    }
    if !(3..=16).contains(&grid.rows) || !(3..=16).contains(&grid.cols) {
        out.push(Violation::GridTooSmall);
        return out;
    }
    if config.horizon == 0 {
        out.push(Violation::HorizonZero);
    }
    let tube = &config.tube;
    if !tube.well_formed() {
        out.push(Violation::TubeDegenerate);
        return out;
    }
    if tube.hole_lane >= tube.lateral_thickness {
        out.push(Violation::HoleLaneOutOfRange);
    }
    if !tube.fits(grid) {
        out.push(Violation::TubeOutOfBounds);
        return out;
    }

    let tool = config.tool;
    let mut tool_ok = true;
    if tool.length < 2 {
        out.push(Violation::ToolTooShort(tool.length));
        tool_ok = false;
    } else if !tool.in_bounds(grid) {
        out.push(Violation::ToolOutOfBounds);
        tool_ok = false;
    } else {
        for cell in tool.cells() {
            if tube.classify(cell) == TubeCell::Wall {
                out.push(Violation::ToolOverlapsWall(cell));
            }
        }
    }

    let agent = config.agent_start;
    if !grid.contains(agent) {
        out.push(Violation::AgentOutOfBounds);
    } else {
        if !tube.classify(agent).walkable() {
            out.push(Violation::AgentOnStructure(agent));
        }
        if tool_ok && tool.contains(agent) {
            out.push(Violation::ToolOverlapsAgent);
        }
    }

    let food = config.food_start;
    if !grid.contains(food) {
        out.push(Violation::FoodOutOfBounds);
    } else {
        if !tube.classify(food).walkable() {
            out.push(Violation::FoodOnStructure(food));
        }
        if tool_ok && tool.contains(food) {
            out.push(Violation::ToolOverlapsFood);
        }
        if food == agent {
            out.push(Violation::AgentOnFood);
        }
    }
    out
}

/// The transition function of one task, with the static layout precomputed.
#[derive(Clone, Debug)]
pub struct Dynamics {
    grid: GridSize,
    layout: Vec<TubeCell>,
    tube: TubeSpec,
    initial: Kinematics,
    horizon: u32,
    terminate_on_trap: bool,
}

impl Dynamics {
    /// Builds the dynamics of a geometrically consistent configuration.
    /// Unlike [`TrapTube::new`], this does not require the task to be fair
    /// (reachable tool, agent outside the tube), so it accepts the sealed
    /// fixtures the planner is tested against.
    pub fn new(config: &TaskConfig) -> Result<Self, ConfigError> {
        let violations = consistency_violations(config);
        if !violations.is_empty() {
            return Err(ConfigError { violations });
        }
        let grid = config.grid;
        let layout = grid.positions().map(|p| config.tube.classify(p)).collect();
        Ok(Dynamics {
            grid,
            layout,
            tube: config.tube,
            initial: Kinematics {
                agent: config.agent_start,
                tool: config.tool,
                food: Food::At(config.food_start),
            },
            horizon: config.horizon,
            terminate_on_trap: config.terminate_on_trap,
        })
    }

    pub fn grid(&self) -> GridSize {
        self.grid
    }

    pub fn tube(&self) -> &TubeSpec {
        &self.tube
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn initial(&self) -> Kinematics {
        self.initial
    }

    #[inline]
    pub fn cell(&self, pos: Position) -> TubeCell {
        self.layout[self.grid.index(pos)]
    }

    /// One deterministic transition. A blocked action leaves every entity in place.
    #[inline]
    pub fn transition(&self, k: Kinematics, action: Action) -> Kinematics {
        let grasped = self
            .grid
            .step(k.agent, action.grasp)
            .is_some_and(|p| k.tool.contains(p));
        let next = if grasped {
            self.translate(k, action.movement)
        } else {
            self.walk(k, action.movement)
        };
        next.unwrap_or(k)
    }

    fn walk(&self, k: Kinematics, dir: Direction) -> Option<Kinematics> {
        let dest = self.grid.step(k.agent, dir)?;
        if !self.cell(dest).walkable() || k.tool.contains(dest) {
            return None;
        }
        Some(Kinematics { agent: dest, ..k })
    }

    fn translate(&self, k: Kinematics, dir: Direction) -> Option<Kinematics> {
        let agent = self.grid.step(k.agent, dir)?;
        if !self.cell(agent).walkable() {
            return None;
        }
        let tool = k.tool.shifted(dir, self.grid)?;
        if tool.cells().any(|c| self.cell(c) == TubeCell::Wall) {
            return None;
        }
        let mut food = k.food;
        if let Food::At(f) = k.food {
            if tool.contains(f) {
                food = self.push_food(f, dir, tool, agent)?;
            }
        }
        Some(Kinematics { agent, tool, food })
    }

    fn push_food(
        &self,
        food: Position,
        dir: Direction,
        tool: ToolPose,
        agent: Position,
    ) -> Option<Food> {
        let free = |p: Position| !tool.contains(p) && p != agent;
        let dest = self.grid.step(food, dir)?;
        if !free(dest) {
            return None;
        }
        match self.cell(dest) {
            TubeCell::Wall => None,
            TubeCell::Trap => Some(Food::Trapped),
            TubeCell::Exit => {
                let beyond = self.grid.step(dest, dir)?;
                (self.cell(beyond).walkable() && free(beyond)).then_some(Food::At(beyond))
            }
            TubeCell::Outside | TubeCell::Interior => Some(Food::At(dest)),
        }
    }

    pub fn state_of(&self, k: Kinematics, step_count: u32, done: bool) -> EnvState {
        EnvState {
            agent: k.agent,
            tool: k.tool,
            food: k.food,
            tube: self.tube,
            step_count,
            done,
        }
    }

    pub fn reset(&self) -> EnvState {
        self.state_of(self.initial, 0, false)
    }

    pub fn step(&self, state: &EnvState, action: Action) -> Result<StepResult, EnvError> {
        if state.done {
            return Err(EnvError::EpisodeFinished);
        }
        let next = self.transition(state.kinematics(), action);
        let step_count = state.step_count + 1;
        let success = next.success();
        let done = success
            || step_count >= self.horizon
            || (self.terminate_on_trap && next.food == Food::Trapped);
        let state = self.state_of(next, step_count, done);
        Ok(StepResult {
            state,
            reward: success as u8,
            done,
        })
    }
}

/// A validated task ready to simulate.
#[derive(Clone, Debug)]
pub struct TrapTube {
    config: TaskConfig,
    dynamics: Dynamics,
}

impl TrapTube {
    pub fn new(config: &TaskConfig) -> Result<Self, ConfigError> {
        validate_config(config)?;
        Ok(TrapTube {
            config: config.clone(),
            dynamics: Dynamics::new(config)?,
        })
    }

    pub fn config(&self) -> &TaskConfig {
        &self.config
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    pub fn reset(&self) -> EnvState {
        self.dynamics.reset()
    }

    pub fn step(&self, state: &EnvState, action: Action) -> Result<StepResult, EnvError> {
        self.dynamics.step(state, action)
    }

    pub fn occupancy(&self, state: &EnvState) -> Occupancy {
        occupancy(state, self.config.grid)
    }

    pub fn observe(&self, state: &EnvState) -> crate::render::Observation {
        crate::render::render(
            state,
            self.config.grid,
            &self.config.palette,
            self.config.symbols,
        )
    }
}

/// Validates `config` and returns its initial state.
pub fn reset(config: &TaskConfig) -> Result<EnvState, ConfigError> {
    Ok(TrapTube::new(config)?.reset())
}

/// Category of every cell, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Occupancy {
    pub grid: GridSize,
    pub cells: Vec<ObjectCategory>,
}

impl Occupancy {
    pub fn get(&self, pos: Position) -> ObjectCategory {
        self.cells[self.grid.index(pos)]
    }

    pub fn count(&self, category: ObjectCategory) -> usize {
        self.cells.iter().filter(|&&c| c == category).count()
    }
}

/// Resolves every cell to one category: Agent over Tool over Food over the
/// tube structures over Ground.
pub fn occupancy(state: &EnvState, grid: GridSize) -> Occupancy {
    let cells = grid
        .positions()
        .map(|p| {
            if p == state.agent {
                ObjectCategory::Agent
            } else if state.tool.contains(p) {
                ObjectCategory::Tool
            } else if state.food == Food::At(p) {
                ObjectCategory::Food
            } else {
                state.tube.classify(p).category()
            }
        })
        .collect();
    Occupancy { grid, cells }
}
