//! Task configurations, the base task, the perceptual / structural / symbolic
//! samplers and their composition over transfer sets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::env::{consistency_violations, ToolPose, TubeCell, TubeEnd, TubeSpec, HORIZON};
use crate::error::{ConfigError, GenerationExhausted, Violation};
use crate::grid::{
    color_to_sphere_point, geodesic_distance, sphere_point_to_color, GridSize, ObjectCategory,
    Orientation, Palette, Position, SymbolMap, Vec3,
};
use crate::planner;
use crate::rng::{self, Stream};

pub const SCHEMA_VERSION: u32 = 1;

/// Minimum great-circle distance between any two category colors.
pub const MIN_SEPARATION: f64 = 0.35;

/// Consecutive rejected draws after which a sampler gives up.
pub const MAX_REJECTIONS: u32 = 10_000;

/// Interior lengths the perceptual sampler draws from.
pub const INTERIOR_LENGTHS: [u8; 3] = [3, 4, 5];

/// Lateral thicknesses the perceptual sampler draws from.
pub const THICKNESSES: [u8; 2] = [1, 2];

/// The kernels applied when sampling a task. The empty set is the base task.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TransferSet {
    pub perceptual: bool,
    pub structural: bool,
    pub symbolic: bool,
}

impl TransferSet {
    pub const BASE: TransferSet = TransferSet::new(false, false, false);
    pub const FULL: TransferSet = TransferSet::new(true, true, true);

    /// The base set followed by the seven non-empty sets, in report order.
    pub const ALL: [TransferSet; 8] = [
        TransferSet::new(false, false, false),
        TransferSet::new(true, false, false),
        TransferSet::new(false, true, false),
        TransferSet::new(false, false, true),
        TransferSet::new(true, true, false),
        TransferSet::new(true, false, true),
        TransferSet::new(false, true, true),
        TransferSet::new(true, true, true),
    ];

    pub const fn new(perceptual: bool, structural: bool, symbolic: bool) -> Self {
        TransferSet {
            perceptual,
            structural,
            symbolic,
        }
    }

    pub fn is_base(self) -> bool {
        self == TransferSet::BASE
    }

    /// Kernel names in canonical order.
    pub fn kernels(self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.perceptual {
            out.push("P");
        }
        if self.structural {
            out.push("St");
        }
        if self.symbolic {
            out.push("Sy");
        }
        out
    }

    /// `"base"`, or kernel names joined with `+`.
    pub fn label(self) -> String {
        if self.is_base() {
            "base".to_owned()
        } else {
            self.kernels().join("+")
        }
    }

    fn with_kernel(mut self, name: &str) -> Result<Self, String> {
        let flag = match name {
            "P" => &mut self.perceptual,
            "St" => &mut self.structural,
            "Sy" => &mut self.symbolic,
            other => {
                return Err(format!(
                    "unknown transfer kernel {other:?} (expected P, St or Sy)"
                ))
            }
        };
        if *flag {
            return Err(format!("kernel {name} listed twice"));
        }
        *flag = true;
        Ok(self)
    }
}

impl fmt::Display for TransferSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for TransferSet {
    type Err = String;

    /// Accepts `base`, an empty string, or kernel names separated by `,` or `+`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() || s.eq_ignore_ascii_case("base") || s.eq_ignore_ascii_case("none") {
            return Ok(TransferSet::BASE);
        }
        s.split([',', '+'])
            .map(str::trim)
            .try_fold(TransferSet::BASE, |set, name| set.with_kernel(name))
    }
}

impl Serialize for TransferSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.kernels().serialize(s)
    }
}

impl<'de> Deserialize<'de> for TransferSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let names = Vec::<String>::deserialize(d)?;
        names
            .iter()
            .try_fold(TransferSet::BASE, |set, n| set.with_kernel(n))
            .map_err(serde::de::Error::custom)
    }
}

/// Seed and transfer set a task was sampled with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub transfer_set: TransferSet,
}

/// The geometric part of a task: everything the perceptual kernel draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Geometry {
    pub tube: TubeSpec,
    pub agent_start: Position,
    pub food_start: Position,
    pub tool: ToolPose,
}

/// A complete task description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub grid: GridSize,
    pub tube: TubeSpec,
    pub agent_start: Position,
    pub food_start: Position,
    pub tool: ToolPose,
    pub palette: Palette,
    pub symbols: SymbolMap,
    #[serde(default = "default_horizon")]
    pub horizon: u32,
    /// End the episode as soon as the food falls into the trap.
    #[serde(default)]
    pub terminate_on_trap: bool,
    pub seed_provenance: Provenance,
}

fn default_horizon() -> u32 {
    HORIZON
}

impl TaskConfig {
    pub fn geometry(&self) -> Geometry {
        Geometry {
            tube: self.tube,
            agent_start: self.agent_start,
            food_start: self.food_start,
            tool: self.tool,
        }
    }

    pub fn set_geometry(&mut self, g: Geometry) {
        self.tube = g.tube;
        self.agent_start = g.agent_start;
        self.food_start = g.food_start;
        self.tool = g.tool;
    }

    pub fn to_canonical_json(&self) -> String {
        crate::json::canonical(self)
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Base sphere point of each category. Agent and food sit at opposite poles,
/// the others on axis and diagonal directions; the closest pair is about
/// 0.96 rad apart.
pub fn base_sphere_point(category: ObjectCategory) -> Vec3 {
    let d = 1.0 / 3f64.sqrt();
    match category {
        ObjectCategory::Ground => [-d, -d, -d],
        ObjectCategory::Agent => [0.0, 0.0, 1.0],
        ObjectCategory::Food => [0.0, 0.0, -1.0],
        ObjectCategory::Tool => [1.0, 0.0, 0.0],
        ObjectCategory::TubeWall => [d, d, d],
        ObjectCategory::Trap => [0.0, -1.0, 0.0],
        ObjectCategory::Exit => [0.0, 1.0, 0.0],
    }
}

pub fn base_palette() -> Palette {
    Palette::from_fn(|c| sphere_point_to_color(base_sphere_point(c)).expect("unit base point"))
}

/// The canonical task every kernel can produce.
pub fn base_config() -> TaskConfig {
    TaskConfig {
        schema_version: SCHEMA_VERSION,
        grid: GridSize::STANDARD,
        tube: TubeSpec {
            axis: Orientation::Horizontal,
            interior_anchor: Position::new(6, 4),
            interior_length: 3,
            lateral_thickness: 1,
            trap_end: TubeEnd::Negative,
            hole_lane: 0,
        },
        agent_start: Position::new(10, 1),
        food_start: Position::new(6, 4),
        tool: ToolPose {
            anchor: Position::new(2, 1),
            orientation: Orientation::Horizontal,
            length: 4,
        },
        palette: base_palette(),
        symbols: SymbolMap::IDENTITY,
        horizon: HORIZON,
        terminate_on_trap: false,
        seed_provenance: Provenance {
            seed: 0,
            transfer_set: TransferSet::BASE,
        },
    }
}

/// Checks every invariant of a task: geometry, appearance and tool reachability.
pub fn validate_config(config: &TaskConfig) -> Result<(), ConfigError> {
    let mut violations = consistency_violations(config);
    let geometry_ok = violations.is_empty();
    if geometry_ok && config.tube.classify(config.agent_start) == TubeCell::Interior {
        violations.push(Violation::AgentInsideTube);
    }
    for category in ObjectCategory::ALL {
        if !config.palette.get(category).in_range() {
            violations.push(Violation::ColorOutOfRange(category));
        }
    }
    if geometry_ok && !planner::tool_in_reach(config) {
        violations.push(Violation::ToolOutOfReach);
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(ConfigError { violations })
    }
}

fn draw_geometry(grid: GridSize, rng: &mut Stream) -> Option<Geometry> {
    let axis = rng.pick(&[Orientation::Horizontal, Orientation::Vertical]);
    let len = rng.pick(&INTERIOR_LENGTHS);
    let thick = rng.pick(&THICKNESSES);
    let trap_end = rng.pick(&[TubeEnd::Negative, TubeEnd::Positive]);
    let hole_lane = rng.below(thick as u64) as u8;

    let (axial_size, lateral_size) = match axis {
        Orientation::Horizontal => (grid.cols, grid.rows),
        Orientation::Vertical => (grid.rows, grid.cols),
    };
    // caps at a0-1 and a0+len, one free cell beyond each
    let axial_slots = (axial_size as i16 - 3 - len as i16).max(0) as u64;
    let lateral_slots = (lateral_size as i16 - 1 - thick as i16).max(0) as u64;
    if axial_slots == 0 || lateral_slots == 0 {
        return None;
    }
    let a0 = 2 + rng.below(axial_slots) as u8;
    let l0 = 1 + rng.below(lateral_slots) as u8;
    let interior_anchor = match axis {
        Orientation::Horizontal => Position::new(l0, a0),
        Orientation::Vertical => Position::new(a0, l0),
    };
    let tube = TubeSpec {
        axis,
        interior_anchor,
        interior_length: len,
        lateral_thickness: thick,
        trap_end,
        hole_lane,
    };

    let food = rng.pick(&tube.hole_lane_cells());

    let orientation = rng.pick(&[Orientation::Horizontal, Orientation::Vertical]);
    let length = len + 1;
    let tools: Vec<ToolPose> = grid
        .positions()
        .map(|anchor| ToolPose {
            anchor,
            orientation,
            length,
        })
        .filter(|t| {
            t.in_bounds(grid)
                && t.cells()
                    .all(|c| c != food && tube.classify(c) == TubeCell::Outside)
        })
        .collect();
    if tools.is_empty() {
        return None;
    }
    let tool = rng.pick(&tools);

    let agents: Vec<Position> = grid
        .positions()
        .filter(|&p| tube.classify(p) == TubeCell::Outside && !tool.contains(p))
        .collect();
    let agent = rng.pick(&agents);

    Some(Geometry {
        tube,
        agent_start: agent,
        food_start: food,
        tool,
    })
}

/// Draws a solvable geometry on the standard grid.
pub fn sample_perceptual(rng: &mut Stream) -> Result<Geometry, GenerationExhausted> {
    let mut candidate = base_config();
    for _ in 0..MAX_REJECTIONS {
        let Some(geometry) = draw_geometry(candidate.grid, rng) else {
            continue;
        };
        candidate.set_geometry(geometry);
        if validate_config(&candidate).is_err() {
            continue;
        }
        if matches!(planner::solve(&candidate), Ok(Some(_))) {
            return Ok(geometry);
        }
    }
    Err(GenerationExhausted {
        sampler: "perceptual",
        attempts: MAX_REJECTIONS,
    })
}

/// Smallest pairwise great-circle distance between category colors, or
/// `None` if some color is off the sphere.
pub fn min_separation(palette: &Palette) -> Option<f64> {
    let points: Vec<Vec3> = ObjectCategory::ALL
        .iter()
        .map(|&c| color_to_sphere_point(palette.get(c)).ok())
        .collect::<Option<_>>()?;
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            best = best.min(geodesic_distance(points[i], points[j]));
        }
    }
    Some(best)
}

/// Redraws the appearance of tool, trap, tube wall, exit and ground as
/// uniform points on the color sphere. Agent and food keep their base colors.
pub fn sample_structural(rng: &mut Stream) -> Result<Palette, GenerationExhausted> {
    let mut palette = base_palette();
    for _ in 0..MAX_REJECTIONS {
        for category in ObjectCategory::RESAMPLED {
            let color = sphere_point_to_color(rng.unit_sphere()).expect("normalized draw");
            palette.set(category, color);
        }
        if min_separation(&palette).is_some_and(|d| d >= MIN_SEPARATION) {
            return Ok(palette);
        }
    }
    Err(GenerationExhausted {
        sampler: "structural",
        attempts: MAX_REJECTIONS,
    })
}

/// Uniform swap partner for the tool; `Tool` leaves appearances unchanged.
pub fn sample_symbolic(rng: &mut Stream) -> SymbolMap {
    SymbolMap::new(rng.pick(&ObjectCategory::SWAP_PARTNERS)).expect("listed partner")
}

/// Samples a task by applying every kernel in `set`; each kernel draws from
/// its own stream derived from `seed`. Fields of absent kernels keep their
/// base values, and the empty set returns [`base_config`] unchanged.
pub fn sample_task(set: TransferSet, seed: u64) -> Result<TaskConfig, GenerationExhausted> {
    let mut config = base_config();
    if set.is_base() {
        return Ok(config);
    }
    if set.perceptual {
        let geometry = sample_perceptual(&mut Stream::derived(seed, rng::PERCEPTUAL, 0))?;
        config.set_geometry(geometry);
    }
    if set.structural {
        config.palette = sample_structural(&mut Stream::derived(seed, rng::STRUCTURAL, 0))?;
    }
    if set.symbolic {
        config.symbols = sample_symbolic(&mut Stream::derived(seed, rng::SYMBOLIC, 0));
    }
    config.seed_provenance = task_provenance(set, seed);
    Ok(config)
}

/// Provenance [`sample_task`] stamps on the task it returns for `set` and
/// `seed`. The base task carries seed 0 whatever seed was asked for.
pub fn task_provenance(set: TransferSet, seed: u64) -> Provenance {
    if set.is_base() {
        base_config().seed_provenance
    } else {
        Provenance {
            seed,
            transfer_set: set,
        }
    }
}

/// Whether the geometry is one the perceptual sampler can return.
fn perceptual_support(config: &TaskConfig) -> bool {
    let tube = &config.tube;
    let grid = config.grid;
    if grid != GridSize::STANDARD
        || !INTERIOR_LENGTHS.contains(&tube.interior_length)
        || !THICKNESSES.contains(&tube.lateral_thickness)
        || tube.hole_lane >= tube.lateral_thickness
    {
        return false;
    }
    let (a0, l0, axial_size, lateral_size) = match tube.axis {
        Orientation::Horizontal => (
            tube.interior_anchor.col,
            tube.interior_anchor.row,
            grid.cols,
            grid.rows,
        ),
        Orientation::Vertical => (
            tube.interior_anchor.row,
            tube.interior_anchor.col,
            grid.rows,
            grid.cols,
        ),
    };
    let len = tube.interior_length;
    let thick = tube.lateral_thickness;
    if a0 < 2 || a0 + len + 1 >= axial_size || l0 < 1 || l0 + thick >= lateral_size {
        return false;
    }
    if !tube.hole_lane_cells().contains(&config.food_start) {
        return false;
    }
    let tool = config.tool;
    if tool.length != len + 1
        || !tool.in_bounds(grid)
        || tool
            .cells()
            .any(|c| c == config.food_start || tube.classify(c) != TubeCell::Outside)
    {
        return false;
    }
    if tube.classify(config.agent_start) != TubeCell::Outside || tool.contains(config.agent_start) {
        return false;
    }
    validate_config(config).is_ok() && matches!(planner::solve(config), Ok(Some(_)))
}

fn structural_support(palette: &Palette) -> bool {
    let base = base_palette();
    palette.agent == base.agent
        && palette.food == base.food
        && min_separation(palette).is_some_and(|d| d >= MIN_SEPARATION)
}

/// Whether `config` lies in the support of the kernels in `set`: fields those
/// kernels govern satisfy the sampler constraints, all others equal the base task.
pub fn in_support(config: &TaskConfig, set: TransferSet) -> bool {
    let base = base_config();
    if config.schema_version != base.schema_version
        || config.grid != base.grid
        || config.horizon != base.horizon
        || config.terminate_on_trap != base.terminate_on_trap
    {
        return false;
    }
    let geometry_ok = if set.perceptual {
        perceptual_support(config)
    } else {
        config.geometry() == base.geometry()
    };
    let palette_ok = if set.structural {
        structural_support(&config.palette)
    } else {
        config.palette == base.palette
    };
    let symbols_ok = if set.symbolic {
        ObjectCategory::SWAP_PARTNERS.contains(&config.symbols.partner())
    } else {
        config.symbols == base.symbols
    };
    geometry_ok && palette_ok && symbols_ok
}
