use std::collections::{BTreeMap, BTreeSet};

use super::{Aabb, Cell, GridMap, SemanticScene, Traversability, WorldError};

/// Maximum number of uncertain objects a single occupancy can track.
pub const MAX_UNCERTAIN_OBJECTS: usize = 64;

/// Static occupancy plus the inflated footprint of every uncertain object.
#[derive(Debug, Clone, PartialEq)]
pub struct Rasterized {
    pub static_blocked: BTreeSet<Cell>,
    /// Uncertain objects in scene order with their clipped cell sets.
    pub uncertain: Vec<(String, BTreeSet<Cell>)>,
}

/// Cells covered by `aabb` inflated by `margin`, clipped to the grid.
pub fn footprint(grid: &GridMap, aabb: &Aabb, margin: f64) -> BTreeSet<Cell> {
    let b = aabb.inflate(margin);
    let to_index = |v: f64, o: f64| ((v - o) / grid.resolution).floor();
    let x0 = to_index(b.min.x, grid.origin.x).max(0.0);
    let y0 = to_index(b.min.y, grid.origin.y).max(0.0);
    let x1 = to_index(b.max.x, grid.origin.x).min(grid.width as f64 - 1.0);
    let y1 = to_index(b.max.y, grid.origin.y).min(grid.height as f64 - 1.0);
    let mut cells = BTreeSet::new();
    if x0 > x1 || y0 > y1 {
        return cells;
    }
    for x in x0 as i32..=x1 as i32 {
        for y in y0 as i32..=y1 as i32 {
            cells.insert(Cell::new(x, y));
        }
    }
    cells
}

/// Converts object geometry into planner-ready occupancy.
pub fn rasterize(scene: &SemanticScene) -> Rasterized {
    let mut static_blocked = scene.grid.static_blocked.clone();
    let mut uncertain = Vec::new();
    for o in &scene.objects {
        let cells = footprint(&scene.grid, &o.aabb, scene.safety_margin);
        match o.traversability {
            Traversability::Known(true) => {}
            Traversability::Known(false) => static_blocked.extend(cells),
            Traversability::Uncertain(_) => uncertain.push((o.id.clone(), cells)),
        }
    }
    Rasterized {
        static_blocked,
        uncertain,
    }
}

/// Per-plan adjustments on top of a scene's own traversability.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    /// Traversability already established (e.g. answered by the human).
    pub known: BTreeMap<String, bool>,
    /// Objects removed from the obstacle picture entirely (e.g. the target).
    pub ignored: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UncertainObject {
    pub id: String,
    pub prior: f64,
    pub cells: BTreeSet<Cell>,
}

/// Dense occupancy used by the search: a blocked flag and an uncertain-object
/// bit mask per cell.
#[derive(Debug, Clone)]
pub struct Occupancy {
    pub grid: GridMap,
    blocked: Vec<bool>,
    masks: Vec<u64>,
    pub uncertain: Vec<UncertainObject>,
}

impl Occupancy {
    pub fn from_scene(scene: &SemanticScene) -> Result<Self, WorldError> {
        Self::build(scene, &Overrides::default())
    }

    pub fn build(scene: &SemanticScene, overrides: &Overrides) -> Result<Self, WorldError> {
        let grid = scene.grid.clone();
        let mut blocked = vec![false; grid.cell_count()];
        for c in &grid.static_blocked {
            blocked[grid.index(*c)] = true;
        }
        let mut masks = vec![0u64; grid.cell_count()];
        let mut uncertain = Vec::new();
        for o in &scene.objects {
            if overrides.ignored.contains(&o.id) {
                continue;
            }
            let trav = match overrides.known.get(&o.id) {
                Some(&bit) => Traversability::Known(bit),
                None => o.traversability,
            };
            let cells = footprint(&grid, &o.aabb, scene.safety_margin);
            match trav {
                Traversability::Known(true) => {}
                Traversability::Known(false) => {
                    for c in &cells {
                        blocked[grid.index(*c)] = true;
                    }
                }
                Traversability::Uncertain(prior) => {
                    if uncertain.len() == MAX_UNCERTAIN_OBJECTS {
                        return Err(WorldError::invalid(
                            "objects",
                            format!("more than {MAX_UNCERTAIN_OBJECTS} uncertain objects"),
                        ));
                    }
                    let bit = 1u64 << uncertain.len();
                    for c in &cells {
                        masks[grid.index(*c)] |= bit;
                    }
                    uncertain.push(UncertainObject {
                        id: o.id.clone(),
                        prior,
                        cells,
                    });
                }
            }
        }
        Ok(Occupancy {
            grid,
            blocked,
            masks,
            uncertain,
        })
    }

    /// Out-of-bounds cells count as blocked.
    pub fn is_blocked(&self, c: Cell) -> bool {
        !self.grid.contains_cell(c) || self.blocked[self.grid.index(c)]
    }

    /// Bit mask (over `self.uncertain`) of uncertain objects covering `c`.
    pub fn mask(&self, c: Cell) -> u64 {
        if self.grid.contains_cell(c) {
            self.masks[self.grid.index(c)]
        } else {
            0
        }
    }

    pub fn uncertain_ids(&self) -> Vec<String> {
        self.uncertain.iter().map(|u| u.id.clone()).collect()
    }
}
