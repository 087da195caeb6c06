//! Hypothesis-augmented A*.
//!
//! Search states pair a grid cell with the set of uncertain objects the
//! partial path assumes passable. Every time the goal is popped under some
//! hypothesis set `H`, the path is recorded and every state whose hypothesis
//! contains `H` is discarded; the search stops once the goal is reached with
//! no assumptions at all. The result is a catalog of paths ordered by cost
//! whose hypothesis sets form an antichain.

use std::cmp::Ordering;
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{Cell, Occupancy, Point, SemanticScene, WorldError};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("no path to the goal exists under any hypothesis")]
    NoPathUnderAnyHypothesis,
    #[error("start cell ({}, {}) is blocked", .0.x, .0.y)]
    StartBlocked(Cell),
    #[error(transparent)]
    World(#[from] WorldError),
}

/// Exact path length as `straight + diagonal·√2` grid steps.
///
/// Two costs compare equal only when both counts match, so ordering and
/// equality never suffer from floating-point accumulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct PathCost {
    pub straight: u32,
    pub diagonal: u32,
}

impl PathCost {
    pub const ZERO: PathCost = PathCost {
        straight: 0,
        diagonal: 0,
    };

    pub const fn new(straight: u32, diagonal: u32) -> Self {
        PathCost { straight, diagonal }
    }

    /// Length in grid units.
    pub fn units(self) -> f64 {
        self.straight as f64 + self.diagonal as f64 * std::f64::consts::SQRT_2
    }

    pub fn meters(self, resolution: f64) -> f64 {
        self.units() * resolution
    }
}

impl std::ops::Add for PathCost {
    type Output = PathCost;
    fn add(self, rhs: PathCost) -> PathCost {
        PathCost::new(self.straight + rhs.straight, self.diagonal + rhs.diagonal)
    }
}

impl Ord for PathCost {
    fn cmp(&self, other: &Self) -> Ordering {
        // Compare ds against dd·√2 with integers only.
        let ds = self.straight as i64 - other.straight as i64;
        let dd = other.diagonal as i64 - self.diagonal as i64;
        match (ds.signum(), dd.signum()) {
            (0, 0) => Ordering::Equal,
            (a, b) if a >= 0 && b <= 0 => Ordering::Greater,
            (a, b) if a <= 0 && b >= 0 => Ordering::Less,
            (1, 1) => (ds * ds).cmp(&(2 * dd * dd)),
            _ => (2 * dd * dd).cmp(&(ds * ds)),
        }
    }
}

impl PartialOrd for PathCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Connectivity {
    #[serde(rename = "4")]
    Four,
    #[default]
    #[serde(rename = "8")]
    Eight,
}

impl Connectivity {
    pub fn moves(self) -> &'static [(i32, i32)] {
        const FOUR: [(i32, i32); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
        const EIGHT: [(i32, i32); 8] = [
            (1, 0),
            (-1, 0),
            (0, 1),
            (0, -1),
            (1, 1),
            (1, -1),
            (-1, 1),
            (-1, -1),
        ];
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        }
    }

    /// Admissible, consistent distance lower bound between two cells.
    pub fn heuristic(self, a: Cell, b: Cell) -> PathCost {
        let dx = (a.x - b.x).unsigned_abs();
        let dy = (a.y - b.y).unsigned_abs();
        match self {
            Connectivity::Four => PathCost::new(dx + dy, 0),
            Connectivity::Eight => PathCost::new(dx.max(dy) - dx.min(dy), dx.min(dy)),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PlannerConfig {
    pub connectivity: Connectivity,
}

/// One grid move: the cells it touches and its cost.
///
/// A diagonal step touches both side cells, so it is valid only when those
/// are free and any uncertain object under them joins the hypothesis.
pub(crate) fn step(
    occ: &Occupancy,
    from: Cell,
    delta: (i32, i32),
) -> Option<(Cell, u64, PathCost)> {
    let to = Cell::new(from.x + delta.0, from.y + delta.1);
    if occ.is_blocked(to) {
        return None;
    }
    if delta.0 != 0 && delta.1 != 0 {
        let side_a = Cell::new(from.x + delta.0, from.y);
        let side_b = Cell::new(from.x, from.y + delta.1);
        if occ.is_blocked(side_a) || occ.is_blocked(side_b) {
            return None;
        }
        let mask = occ.mask(to) | occ.mask(side_a) | occ.mask(side_b);
        Some((to, mask, PathCost::new(0, 1)))
    } else {
        Some((to, occ.mask(to), PathCost::new(1, 0)))
    }
}

/// Set of uncertain objects assumed passable, as bits over the catalog's
/// canonical uncertain-object order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct HypothesisSet(pub u64);

impl HypothesisSet {
    pub const EMPTY: HypothesisSet = HypothesisSet(0);

    pub fn contains(self, index: usize) -> bool {
        self.0 >> index & 1 == 1
    }

    pub fn is_subset_of(self, other: HypothesisSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn indices(self) -> impl Iterator<Item = usize> {
        (0..64).filter(move |i| self.contains(*i))
    }

    pub fn ids(self, names: &[String]) -> Vec<String> {
        self.indices().map(|i| names[i].clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePath {
    /// Cells from start to goal, inclusive.
    pub waypoints: Vec<Cell>,
    pub cost: PathCost,
    pub hypothesis: HypothesisSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePathCatalog {
    pub paths: Vec<CandidatePath>,
    /// Uncertain objects of the searched occupancy; hypothesis bit `i` is `uncertain_ids[i]`.
    pub uncertain_ids: Vec<String>,
    pub resolution: f64,
    pub has_unconditional: bool,
}

impl CandidatePathCatalog {
    pub fn cost_m(&self, index: usize) -> f64 {
        self.paths[index].cost.meters(self.resolution)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct QueueKey {
    f: PathCost,
    h: PathCost,
    hyp_len: u32,
    cell: Cell,
    hyp: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct QueueEntry {
    key: QueueKey,
    g: PathCost,
}

impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert so the smallest key pops first.
        other.key.cmp(&self.key)
    }
}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

type StateKey = (Cell, u64);

/// Runs the hypothesis-augmented search on a scene's own start and goal.
pub fn plan_with_hypotheses(
    scene: &SemanticScene,
    config: PlannerConfig,
) -> Result<CandidatePathCatalog, SearchError> {
    let occ = Occupancy::from_scene(scene)?;
    let start = scene.grid.world_to_cell(scene.start)?;
    let goal = scene.grid.world_to_cell(scene.goal)?;
    search(&occ, start, goal, config)
}

/// Runs the search between two cells of an occupancy.
pub fn search(
    occ: &Occupancy,
    start: Cell,
    goal: Cell,
    config: PlannerConfig,
) -> Result<CandidatePathCatalog, SearchError> {
    if occ.is_blocked(start) {
        return Err(SearchError::StartBlocked(start));
    }
    let conn = config.connectivity;
    let mut recorded: Vec<CandidatePath> = Vec::new();
    let mut best_g: HashMap<StateKey, (PathCost, Option<StateKey>)> = HashMap::new();
    let mut closed: HashSet<StateKey> = HashSet::new();
    let mut queue = BinaryHeap::new();

    let dominated = |recorded: &[CandidatePath], hyp: u64| {
        recorded
            .iter()
            .any(|p| p.hypothesis.is_subset_of(HypothesisSet(hyp)))
    };

    let start_key = (start, occ.mask(start));
    best_g.insert(start_key, (PathCost::ZERO, None));
    let h0 = conn.heuristic(start, goal);
    queue.push(QueueEntry {
        key: QueueKey {
            f: h0,
            h: h0,
            hyp_len: start_key.1.count_ones(),
            cell: start,
            hyp: start_key.1,
        },
        g: PathCost::ZERO,
    });

    while let Some(QueueEntry { key, g }) = queue.pop() {
        let state = (key.cell, key.hyp);
        if closed.contains(&state) || best_g[&state].0 != g || dominated(&recorded, key.hyp) {
            continue;
        }
        closed.insert(state);

        if key.cell == goal {
            let waypoints = reconstruct(&best_g, state);
            recorded.push(CandidatePath {
                waypoints,
                cost: g,
                hypothesis: HypothesisSet(key.hyp),
            });
            if key.hyp == 0 {
                break;
            }
            continue;
        }

        for &delta in conn.moves() {
            let Some((next, mask, cost)) = step(occ, key.cell, delta) else {
                continue;
            };
            let hyp = key.hyp | mask;
            let next_state = (next, hyp);
            if closed.contains(&next_state) || dominated(&recorded, hyp) {
                continue;
            }
            let g_next = g + cost;
            match best_g.entry(next_state) {
                Entry::Occupied(mut e) => {
                    if g_next >= e.get().0 {
                        continue;
                    }
                    e.insert((g_next, Some(state)));
                }
                Entry::Vacant(e) => {
                    e.insert((g_next, Some(state)));
                }
            }
            let h = conn.heuristic(next, goal);
            queue.push(QueueEntry {
                key: QueueKey {
                    f: g_next + h,
                    h,
                    hyp_len: hyp.count_ones(),
                    cell: next,
                    hyp,
                },
                g: g_next,
            });
        }
    }

    if recorded.is_empty() {
        return Err(SearchError::NoPathUnderAnyHypothesis);
    }
    let has_unconditional = recorded.iter().any(|p| p.hypothesis.is_empty());
    Ok(CandidatePathCatalog {
        paths: recorded,
        uncertain_ids: occ.uncertain_ids(),
        resolution: occ.grid.resolution,
        has_unconditional,
    })
}

fn reconstruct(
    best_g: &HashMap<StateKey, (PathCost, Option<StateKey>)>,
    mut state: StateKey,
) -> Vec<Cell> {
    let mut cells = vec![state.0];
    while let Some(parent) = best_g[&state].1 {
        cells.push(parent.0);
        state = parent;
    }
    cells.reverse();
    cells
}

/// Uncertain objects (as a mask) touched by walking `cells`, including the
/// side cells of diagonal steps. `None` if the walk is not a valid grid path.
pub fn swept_mask(occ: &Occupancy, cells: &[Cell]) -> Option<u64> {
    let first = cells.first()?;
    if occ.is_blocked(*first) {
        return None;
    }
    let mut mask = occ.mask(*first);
    for w in cells.windows(2) {
        let delta = (w[1].x - w[0].x, w[1].y - w[0].y);
        if delta.0.abs() > 1 || delta.1.abs() > 1 || delta == (0, 0) {
            return None;
        }
        let (_, m, _) = step(occ, w[0], delta)?;
        mask |= m;
    }
    Some(mask)
}

/// Waypoints of a catalog path as cell centers.
pub fn waypoints_world(occ: &Occupancy, path: &CandidatePath) -> Vec<Point> {
    path.waypoints
        .iter()
        .map(|c| occ.grid.cell_to_world(*c))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{Aabb, GridMap, SceneObject, Traversability};

    fn cost(s: u32, d: u32) -> PathCost {
        PathCost::new(s, d)
    }

    #[test]
    fn path_cost_orders_exactly() {
        assert!(cost(2, 0) > cost(0, 1));
        assert!(cost(1, 0) < cost(0, 1));
        assert!(cost(3, 0) > cost(0, 2));
        assert!(cost(2, 1) < cost(4, 0));
        assert_eq!(cost(1, 1).cmp(&cost(1, 1)), Ordering::Equal);
        let mut all: Vec<PathCost> = (0..8)
            .flat_map(|s| (0..8).map(move |d| cost(s, d)))
            .collect();
        all.sort();
        for w in all.windows(2) {
            assert!(w[0].units() < w[1].units());
        }
    }

    /// 5×3 grid, unit cells, o1 covers (2,0) and (2,1).
    pub(crate) fn five_by_three() -> SemanticScene {
        SemanticScene {
            grid: GridMap::new(Point::new(0.0, 0.0), 1.0, 5, 3),
            objects: vec![SceneObject::new(
                "o1",
                "crate",
                Aabb::new(Point::new(2.5, 0.5), Point::new(2.5, 1.5)),
                Traversability::Uncertain(0.5),
            )],
            tasks: vec![],
            start: Point::new(0.5, 1.5),
            goal: Point::new(4.5, 1.5),
            safety_margin: 0.0,
        }
    }

    #[test]
    fn five_by_three_catalog() {
        let scene = five_by_three();
        let config = PlannerConfig {
            connectivity: Connectivity::Four,
        };
        let cat = plan_with_hypotheses(&scene, config).unwrap();
        assert_eq!(cat.paths.len(), 2);
        assert_eq!(cat.paths[0].cost, cost(4, 0));
        assert_eq!(cat.paths[0].hypothesis.ids(&cat.uncertain_ids), vec!["o1"]);
        assert_eq!(cat.paths[1].cost, cost(6, 0));
        assert!(cat.paths[1].hypothesis.is_empty());
        assert!(cat.paths[1].waypoints.iter().any(|c| *c == Cell::new(2, 2)));
        assert!(cat.has_unconditional);
    }

    #[test]
    fn no_uncertainty_is_plain_astar() {
        let mut scene = five_by_three();
        scene.objects.clear();
        let cat = plan_with_hypotheses(&scene, PlannerConfig::default()).unwrap();
        assert_eq!(cat.paths.len(), 1);
        assert_eq!(cat.paths[0].cost, cost(4, 0));
        assert!(cat.paths[0].hypothesis.is_empty());
    }

    #[test]
    fn walled_off_goal_has_no_path() {
        let mut scene = five_by_three();
        scene.objects[0] = SceneObject::new(
            "wall",
            "wall",
            Aabb::new(Point::new(2.5, 0.5), Point::new(2.5, 2.5)),
            Traversability::Known(false),
        );
        let err = plan_with_hypotheses(&scene, PlannerConfig::default()).unwrap_err();
        assert!(matches!(err, SearchError::NoPathUnderAnyHypothesis));
    }

    #[test]
    fn uncertain_wall_gives_only_conditional_path() {
        let mut scene = five_by_three();
        scene.objects[0].aabb = Aabb::new(Point::new(2.5, 0.5), Point::new(2.5, 2.5));
        let cat = plan_with_hypotheses(&scene, PlannerConfig::default()).unwrap();
        assert_eq!(cat.paths.len(), 1);
        assert!(!cat.has_unconditional);
    }

    #[test]
    fn diagonal_cannot_cut_blocked_corner() {
        let grid = GridMap::new(Point::new(0.0, 0.0), 1.0, 2, 2);
        let scene = SemanticScene {
            grid,
            objects: vec![
                SceneObject::new(
                    "a",
                    "a",
                    Aabb::new(Point::new(1.5, 0.5), Point::new(1.5, 0.5)),
                    Traversability::Known(false),
                ),
                SceneObject::new(
                    "b",
                    "b",
                    Aabb::new(Point::new(0.5, 1.5), Point::new(0.5, 1.5)),
                    Traversability::Uncertain(0.5),
                ),
            ],
            tasks: vec![],
            start: Point::new(0.5, 0.5),
            goal: Point::new(1.5, 1.5),
            safety_margin: 0.0,
        };
        let cat = plan_with_hypotheses(&scene, PlannerConfig::default()).unwrap();
        // Only route is through b, orthogonally.
        assert_eq!(cat.paths.len(), 1);
        assert_eq!(cat.paths[0].cost, cost(2, 0));
        assert_eq!(cat.paths[0].hypothesis.ids(&cat.uncertain_ids), vec!["b"]);
    }

    #[test]
    fn swept_mask_matches_hypothesis() {
        let scene = five_by_three();
        let occ = Occupancy::from_scene(&scene).unwrap();
        let cat = plan_with_hypotheses(&scene, PlannerConfig::default()).unwrap();
        for p in &cat.paths {
            assert_eq!(swept_mask(&occ, &p.waypoints), Some(p.hypothesis.0));
        }
    }
}
