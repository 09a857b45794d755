//! Cell coordinates, directions, object categories and their appearance.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ColorError;

/// Side length of the shipped square grid.
pub const GRID_SIDE: u8 = 12;

/// Number of color channels per cell.
pub const CHANNELS: usize = 3;

/// Tolerance for accepting a point as unit length in [`sphere_point_to_color`].
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// Tolerance for accepting a color as lying on the color sphere.
pub const MANIFOLD_TOLERANCE: f64 = 1e-6;

/// A point in R^3; unit length when it represents a feature on the sphere.
pub type Vec3 = [f64; 3];

/// Grid dimensions. The shipped environment is always 12×12; smaller grids
/// exist for exhaustive test fixtures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSize {
    pub rows: u8,
    pub cols: u8,
}

impl GridSize {
    pub const STANDARD: GridSize = GridSize {
        rows: GRID_SIDE,
        cols: GRID_SIDE,
    };

    pub const fn square(side: u8) -> Self {
        GridSize {
            rows: side,
            cols: side,
        }
    }

    pub const fn cell_count(self) -> usize {
        self.rows as usize * self.cols as usize
    }

    pub fn contains(self, pos: Position) -> bool {
        pos.row < self.rows && pos.col < self.cols
    }

    /// Row-major index of an in-bounds position.
    #[inline]
    pub fn index(self, pos: Position) -> usize {
        pos.row as usize * self.cols as usize + pos.col as usize
    }

    #[inline]
    pub fn position(self, index: usize) -> Position {
        Position::new(
            (index / self.cols as usize) as u8,
            (index % self.cols as usize) as u8,
        )
    }

    /// The neighbouring cell in `dir`, or `None` at the border.
    #[inline]
    pub fn step(self, pos: Position, dir: Direction) -> Option<Position> {
        let (dr, dc) = dir.delta();
        let row = pos.row as i16 + dr as i16;
        let col = pos.col as i16 + dc as i16;
        if row < 0 || col < 0 || row >= self.rows as i16 || col >= self.cols as i16 {
            None
        } else {
            Some(Position::new(row as u8, col as u8))
        }
    }

    pub fn positions(self) -> impl Iterator<Item = Position> {
        (0..self.rows).flat_map(move |r| (0..self.cols).map(move |c| Position::new(r, c)))
    }
}

impl Default for GridSize {
    fn default() -> Self {
        GridSize::STANDARD
    }
}

/// A cell, row-major with the origin at the top-left corner.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Position {
    pub row: u8,
    pub col: u8,
}

impl Position {
    pub const fn new(row: u8, col: u8) -> Self {
        Position { row, col }
    }

    /// Manhattan distance.
    pub fn distance(self, other: Position) -> u32 {
        (self.row.abs_diff(other.row) + self.col.abs_diff(other.col)) as u32
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl Direction {
    /// Enumeration order used everywhere actions are enumerated.
    pub const ALL: [Direction; 4] = [
        Direction::Up,
        Direction::Down,
        Direction::Left,
        Direction::Right,
    ];

    pub const fn opposite(self) -> Direction {
        match self {
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
            Direction::Left => Direction::Right,
            Direction::Right => Direction::Left,
        }
    }

    /// `(row, col)` offset.
    pub const fn delta(self) -> (i8, i8) {
        match self {
            Direction::Up => (-1, 0),
            Direction::Down => (1, 0),
            Direction::Left => (0, -1),
            Direction::Right => (0, 1),
        }
    }

    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Up => "Up",
            Direction::Down => "Down",
            Direction::Left => "Left",
            Direction::Right => "Right",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Orientation {
    Horizontal,
    Vertical,
}

impl Orientation {
    /// Direction of increasing extent (anchor towards the far end).
    pub const fn forward(self) -> Direction {
        match self {
            Orientation::Horizontal => Direction::Right,
            Orientation::Vertical => Direction::Down,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ObjectCategory {
    Ground,
    Agent,
    Food,
    Tool,
    TubeWall,
    Trap,
    Exit,
}

impl ObjectCategory {
    pub const ALL: [ObjectCategory; 7] = [
        ObjectCategory::Ground,
        ObjectCategory::Agent,
        ObjectCategory::Food,
        ObjectCategory::Tool,
        ObjectCategory::TubeWall,
        ObjectCategory::Trap,
        ObjectCategory::Exit,
    ];

    /// Categories whose appearance the structural sampler redraws.
    pub const RESAMPLED: [ObjectCategory; 5] = [
        ObjectCategory::Tool,
        ObjectCategory::Trap,
        ObjectCategory::TubeWall,
        ObjectCategory::Exit,
        ObjectCategory::Ground,
    ];

    /// Categories the tool's appearance may be exchanged with.
    pub const SWAP_PARTNERS: [ObjectCategory; 4] = [
        ObjectCategory::Tool,
        ObjectCategory::Trap,
        ObjectCategory::TubeWall,
        ObjectCategory::Exit,
    ];
}

impl fmt::Display for ObjectCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// An RGB-like 3-tuple with every channel in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellColor(pub [f64; CHANNELS]);

impl CellColor {
    pub fn channels(self) -> [f64; CHANNELS] {
        self.0
    }

    pub fn in_range(self) -> bool {
        self.0.iter().all(|c| (0.0..=1.0).contains(c))
    }

    pub fn quantize(self) -> [u8; CHANNELS] {
        self.0.map(|c| (c.clamp(0.0, 1.0) * 255.0).round() as u8)
    }

    /// Whether the color maps back to a unit vector within [`MANIFOLD_TOLERANCE`].
    pub fn on_manifold(self) -> bool {
        color_to_sphere_point(self).is_ok()
    }
}

fn norm(p: Vec3) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

/// Maps a unit vector onto the color cube with `c_i = (p_i + 1) / 2`.
pub fn sphere_point_to_color(p: Vec3) -> Result<CellColor, ColorError> {
    let n = norm(p);
    if !n.is_finite() || (n - 1.0).abs() > UNIT_TOLERANCE {
        return Err(ColorError::NotUnit { norm: n });
    }
    Ok(CellColor(p.map(|x| (x + 1.0) / 2.0)))
}

/// Inverse of [`sphere_point_to_color`].
pub fn color_to_sphere_point(c: CellColor) -> Result<Vec3, ColorError> {
    let p = c.0.map(|x| 2.0 * x - 1.0);
    let n = norm(p);
    if !n.is_finite() || (n - 1.0).abs() > MANIFOLD_TOLERANCE {
        return Err(ColorError::NotOnManifold { norm: n });
    }
    Ok(p)
}

/// Great-circle distance in radians between two unit vectors.
pub fn geodesic_distance(a: Vec3, b: Vec3) -> f64 {
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    dot.clamp(-1.0, 1.0).acos()
}

/// Appearance of every object category.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Palette {
    #[serde(rename = "Ground")]
    pub ground: CellColor,
    #[serde(rename = "Agent")]
    pub agent: CellColor,
    #[serde(rename = "Food")]
    pub food: CellColor,
    #[serde(rename = "Tool")]
    pub tool: CellColor,
    #[serde(rename = "TubeWall")]
    pub tube_wall: CellColor,
    #[serde(rename = "Trap")]
    pub trap: CellColor,
    #[serde(rename = "Exit")]
    pub exit: CellColor,
}

impl Palette {
    /// Builds a palette from a per-category function.
    pub fn from_fn(mut f: impl FnMut(ObjectCategory) -> CellColor) -> Self {
        Palette {
            ground: f(ObjectCategory::Ground),
            agent: f(ObjectCategory::Agent),
            food: f(ObjectCategory::Food),
            tool: f(ObjectCategory::Tool),
            tube_wall: f(ObjectCategory::TubeWall),
            trap: f(ObjectCategory::Trap),
            exit: f(ObjectCategory::Exit),
        }
    }

    pub fn get(&self, category: ObjectCategory) -> CellColor {
        match category {
            ObjectCategory::Ground => self.ground,
            ObjectCategory::Agent => self.agent,
            ObjectCategory::Food => self.food,
            ObjectCategory::Tool => self.tool,
            ObjectCategory::TubeWall => self.tube_wall,
            ObjectCategory::Trap => self.trap,
            ObjectCategory::Exit => self.exit,
        }
    }

    pub fn set(&mut self, category: ObjectCategory, color: CellColor) {
        let slot = match category {
            ObjectCategory::Ground => &mut self.ground,
            ObjectCategory::Agent => &mut self.agent,
            ObjectCategory::Food => &mut self.food,
            ObjectCategory::Tool => &mut self.tool,
            ObjectCategory::TubeWall => &mut self.tube_wall,
            ObjectCategory::Trap => &mut self.trap,
            ObjectCategory::Exit => &mut self.exit,
        };
        *slot = color;
    }

    /// The palette as seen through a symbol swap: the tool and its partner
    /// exchange colors. Applying the same map twice restores the original.
    pub fn swapped(&self, symbols: SymbolMap) -> Palette {
        let mut out = *self;
        let partner = symbols.partner();
        out.set(ObjectCategory::Tool, self.get(partner));
        out.set(partner, self.get(ObjectCategory::Tool));
        out
    }
}

/// Which category the tool exchanges its appearance with.
/// `Tool` is the identity map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawSymbolMap")]
pub struct SymbolMap {
    partner: ObjectCategory,
}

#[derive(Deserialize)]
struct RawSymbolMap {
    partner: ObjectCategory,
}

impl TryFrom<RawSymbolMap> for SymbolMap {
    type Error = ColorError;

    fn try_from(raw: RawSymbolMap) -> Result<Self, Self::Error> {
        SymbolMap::new(raw.partner)
    }
}

impl SymbolMap {
    pub const IDENTITY: SymbolMap = SymbolMap {
        partner: ObjectCategory::Tool,
    };

    pub fn new(partner: ObjectCategory) -> Result<Self, ColorError> {
        if ObjectCategory::SWAP_PARTNERS.contains(&partner) {
            Ok(SymbolMap { partner })
        } else {
            Err(ColorError::InvalidPartner(partner))
        }
    }

    pub fn partner(self) -> ObjectCategory {
        self.partner
    }

    pub fn is_identity(self) -> bool {
        self.partner == ObjectCategory::Tool
    }

    /// The category whose color is drawn for a cell occupied by `category`.
    pub fn appearance(self, category: ObjectCategory) -> ObjectCategory {
        if category == ObjectCategory::Tool {
            self.partner
        } else if category == self.partner {
            ObjectCategory::Tool
        } else {
            category
        }
    }
}

impl Default for SymbolMap {
    fn default() -> Self {
        SymbolMap::IDENTITY
    }
}
