//! Scenes, tasks, grids and scenario files.
//!
//! A [`SemanticScene`] is the planner's view of the workspace: a metric grid,
//! the detected objects with their traversability, the task set used by the
//! collaboration mode, and a start/goal pair. Scenes are immutable once
//! loaded; everything downstream works on borrowed scenes.

mod raster;
mod scenario;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use raster::{footprint, MAX_UNCERTAIN_OBJECTS};
pub use raster::{rasterize, Occupancy, Overrides, Rasterized, UncertainObject};
pub use scenario::{load_ground_truth, load_scenario, AnswerKey, Scenario};

/// Default inflation applied around every object footprint (m).
pub const DEFAULT_SAFETY_MARGIN: f64 = 0.25;
/// Default radius inside which a task counts as reached (m).
pub const DEFAULT_COMPLETION_RADIUS: f64 = 0.5;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("point ({x}, {y}) lies outside the grid")]
    OutOfBounds { x: f64, y: f64 },
}

impl WorldError {
    pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        WorldError::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// A planar point in world coordinates (m). Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn scale(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }

    /// Moves from `self` toward `target` by at most `step`, stopping on it.
    pub fn step_toward(self, target: Point, step: f64) -> Point {
        let delta = target - self;
        let dist = delta.norm();
        if dist <= step || dist == 0.0 {
            target
        } else {
            self + delta.scale(step / dist)
        }
    }
}

impl From<[f64; 2]> for Point {
    fn from(v: [f64; 2]) -> Self {
        Point::new(v[0], v[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.3}, {:.3})", self.x, self.y)
    }
}

/// Integer grid index. `x` runs along the world x axis, `y` along world y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[i32; 2]", into = "[i32; 2]")]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Cell { x, y }
    }
}

impl From<[i32; 2]> for Cell {
    fn from(v: [i32; 2]) -> Self {
        Cell::new(v[0], v[1])
    }
}

impl From<Cell> for [i32; 2] {
    fn from(c: Cell) -> Self {
        [c.x, c.y]
    }
}

/// Axis-aligned box in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point,
    pub max: Point,
}

impl Aabb {
    pub fn new(min: Point, max: Point) -> Self {
        Aabb { min, max }
    }

    pub fn center(&self) -> Point {
        Point::new(
            0.5 * (self.min.x + self.max.x),
            0.5 * (self.min.y + self.max.y),
        )
    }

    pub fn area(&self) -> f64 {
        (self.max.x - self.min.x) * (self.max.y - self.min.y)
    }

    pub fn inflate(&self, margin: f64) -> Aabb {
        Aabb {
            min: Point::new(self.min.x - margin, self.min.y - margin),
            max: Point::new(self.max.x + margin, self.max.y + margin),
        }
    }
}

/// Metric occupancy grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMap {
    pub origin: Point,
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    /// Cells blocked independently of any object (walls authored directly).
    #[serde(
        default,
        rename = "blocked_cells",
        skip_serializing_if = "BTreeSet::is_empty"
    )]
    pub static_blocked: BTreeSet<Cell>,
}

impl GridMap {
    pub fn new(origin: Point, resolution: f64, width: usize, height: usize) -> Self {
        GridMap {
            origin,
            resolution,
            width,
            height,
            static_blocked: BTreeSet::new(),
        }
    }

    pub fn contains_cell(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && (c.x as usize) < self.width && (c.y as usize) < self.height
    }

    pub fn contains_point(&self, p: Point) -> bool {
        self.world_to_cell(p).is_ok()
    }

    /// `floor((p - origin) / resolution)` per axis.
    pub fn world_to_cell(&self, p: Point) -> Result<Cell, WorldError> {
        let fx = ((p.x - self.origin.x) / self.resolution).floor();
        let fy = ((p.y - self.origin.y) / self.resolution).floor();
        let inside = fx >= 0.0 && fy >= 0.0 && fx < self.width as f64 && fy < self.height as f64;
        if !inside {
            return Err(WorldError::OutOfBounds { x: p.x, y: p.y });
        }
        Ok(Cell::new(fx as i32, fy as i32))
    }

    /// Center of a cell in world coordinates.
    pub fn cell_to_world(&self, c: Cell) -> Point {
        Point::new(
            self.origin.x + (c.x as f64 + 0.5) * self.resolution,
            self.origin.y + (c.y as f64 + 0.5) * self.resolution,
        )
    }

    pub fn index(&self, c: Cell) -> usize {
        c.y as usize * self.width + c.x as usize
    }

    pub fn cell_count(&self) -> usize {
        self.width * self.height
    }
}

/// Whether an object can be flown through.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "TraversabilityRepr", into = "TraversabilityRepr")]
pub enum Traversability {
    Known(bool),
    /// Prior probability of being passable, strictly inside (0, 1).
    Uncertain(f64),
}

impl Traversability {
    pub fn is_uncertain(self) -> bool {
        matches!(self, Traversability::Uncertain(_))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TraversabilityRepr {
    Label(TraversabilityLabel),
    Prior { prior: f64 },
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum TraversabilityLabel {
    Passable,
    Blocked,
}

impl From<TraversabilityRepr> for Traversability {
    fn from(r: TraversabilityRepr) -> Self {
        match r {
            TraversabilityRepr::Label(TraversabilityLabel::Passable) => Traversability::Known(true),
            TraversabilityRepr::Label(TraversabilityLabel::Blocked) => Traversability::Known(false),
            TraversabilityRepr::Prior { prior } => Traversability::Uncertain(prior),
        }
    }
}

impl From<Traversability> for TraversabilityRepr {
    fn from(t: Traversability) -> Self {
        match t {
            Traversability::Known(true) => TraversabilityRepr::Label(TraversabilityLabel::Passable),
            Traversability::Known(false) => TraversabilityRepr::Label(TraversabilityLabel::Blocked),
            Traversability::Uncertain(prior) => TraversabilityRepr::Prior { prior },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: String,
    pub name: String,
    pub aabb: Aabb,
    pub traversability: Traversability,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
    #[serde(default = "default_confidence", rename = "confidence")]
    pub detection_confidence: f64,
}

fn default_confidence() -> f64 {
    1.0
}

impl SceneObject {
    pub fn new(id: &str, name: &str, aabb: Aabb, traversability: Traversability) -> Self {
        SceneObject {
            id: id.to_string(),
            name: name.to_string(),
            aabb,
            traversability,
            attributes: BTreeMap::new(),
            detection_confidence: 1.0,
        }
    }

    pub fn with_attribute(mut self, key: &str, value: &str) -> Self {
        self.attributes.insert(key.to_string(), value.to_string());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Independent,
    Cooperative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub position: Point,
    pub kind: TaskKind,
    #[serde(default = "default_completion_radius")]
    pub completion_radius: f64,
}

fn default_completion_radius() -> f64 {
    DEFAULT_COMPLETION_RADIUS
}

impl Task {
    pub fn new(id: &str, position: Point, kind: TaskKind) -> Self {
        Task {
            id: id.to_string(),
            position,
            kind,
            completion_radius: DEFAULT_COMPLETION_RADIUS,
        }
    }

    pub fn is_cooperative(&self) -> bool {
        self.kind == TaskKind::Cooperative
    }
}

fn default_safety_margin() -> f64 {
    DEFAULT_SAFETY_MARGIN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticScene {
    pub grid: GridMap,
    #[serde(default)]
    pub objects: Vec<SceneObject>,
    #[serde(default)]
    pub tasks: Vec<Task>,
    pub start: Point,
    pub goal: Point,
    #[serde(default = "default_safety_margin")]
    pub safety_margin: f64,
}

impl SemanticScene {
    pub fn object(&self, id: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn task(&self, id: &str) -> Option<&Task> {
        self.tasks.iter().find(|t| t.id == id)
    }

    /// Ids of uncertain objects in scene order.
    pub fn uncertain_ids(&self) -> Vec<String> {
        self.objects
            .iter()
            .filter(|o| o.traversability.is_uncertain())
            .map(|o| o.id.clone())
            .collect()
    }

    /// Checks every scene invariant, naming the first offending field.
    pub fn validate(&self) -> Result<(), WorldError> {
        let g = &self.grid;
        if !(g.resolution > 0.0) || !g.resolution.is_finite() {
            return Err(WorldError::invalid("grid.resolution", "must be > 0"));
        }
        if g.width == 0 {
            return Err(WorldError::invalid("grid.width", "must be >= 1"));
        }
        if g.height == 0 {
            return Err(WorldError::invalid("grid.height", "must be >= 1"));
        }
        if let Some(c) = g.static_blocked.iter().find(|c| !g.contains_cell(**c)) {
            return Err(WorldError::invalid(
                "grid.blocked_cells",
                format!("cell ({}, {}) lies outside the grid", c.x, c.y),
            ));
        }
        if !(self.safety_margin >= 0.0) {
            return Err(WorldError::invalid("safety_margin", "must be >= 0"));
        }

        let mut seen = BTreeSet::new();
        for (i, o) in self.objects.iter().enumerate() {
            if !seen.insert(o.id.as_str()) {
                return Err(WorldError::invalid(
                    format!("objects[{i}].id"),
                    format!("duplicate object id \"{}\"", o.id),
                ));
            }
            if o.aabb.min.x > o.aabb.max.x || o.aabb.min.y > o.aabb.max.y {
                return Err(WorldError::invalid(
                    format!("objects[{i}].aabb"),
                    format!("min exceeds max for \"{}\"", o.id),
                ));
            }
            if let Traversability::Uncertain(p) = o.traversability {
                if !(p > 0.0 && p < 1.0) {
                    return Err(WorldError::invalid(
                        format!("objects[{i}].traversability.prior"),
                        format!("prior {p} of \"{}\" must lie strictly inside (0, 1)", o.id),
                    ));
                }
            }
            if !(0.0..=1.0).contains(&o.detection_confidence) {
                return Err(WorldError::invalid(
                    format!("objects[{i}].confidence"),
                    format!("confidence of \"{}\" must lie in [0, 1]", o.id),
                ));
            }
        }

        let mut seen = BTreeSet::new();
        for (i, t) in self.tasks.iter().enumerate() {
            if !seen.insert(t.id.as_str()) {
                return Err(WorldError::invalid(
                    format!("tasks[{i}].id"),
                    format!("duplicate task id \"{}\"", t.id),
                ));
            }
            if !(t.completion_radius > 0.0) {
                return Err(WorldError::invalid(
                    format!("tasks[{i}].completion_radius"),
                    format!("completion radius of \"{}\" must be > 0", t.id),
                ));
            }
        }

        let raster = rasterize(self);
        for (field, p) in [("start", self.start), ("goal", self.goal)] {
            let cell = g
                .world_to_cell(p)
                .map_err(|_| WorldError::invalid(field, format!("{p} lies outside the grid")))?;
            if raster.static_blocked.contains(&cell) {
                return Err(WorldError::invalid(
                    field,
                    format!("{p} falls on a statically blocked cell"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Navigate,
    PickUp,
    Deliver,
    /// Return to the initial position.
    Return,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionStep {
    pub action: ActionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

/// A natural-language command with its scripted step list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instruction {
    #[serde(rename = "text")]
    pub raw_text: String,
    pub steps: Vec<InstructionStep>,
}

impl Instruction {
    pub fn new(raw_text: &str, steps: Vec<InstructionStep>) -> Self {
        Instruction {
            raw_text: raw_text.to_string(),
            steps,
        }
    }

    pub fn step(action: ActionKind, target: Option<&str>) -> InstructionStep {
        InstructionStep {
            action,
            target: target.map(str::to_string),
        }
    }
}
