#![allow(dead_code)]

pub mod wire;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use jointplan::policy::{next_query, CostParams, NextStep, QueryPolicy};
use jointplan::search::{plan_with_hypotheses, swept_mask, PlannerConfig, SearchError};
use jointplan::tree::{build_decision_tree, DecisionTree, Outcome};
use jointplan::world::{
    Aabb, Cell, GridMap, Occupancy, Point, SceneObject, SemanticScene, Traversability,
};
use rand::Rng;

/// Box covering the cell range [x0, x1] x [y0, y1] on a unit grid.
pub fn cell_box(x0: i32, y0: i32, x1: i32, y1: i32) -> Aabb {
    Aabb::new(
        Point::new(x0 as f64 + 0.1, y0 as f64 + 0.1),
        Point::new(x1 as f64 + 0.9, y1 as f64 + 0.9),
    )
}

/// A random unit-resolution scene with solid blocks and up to
/// `max_uncertain` uncertain objects. Start and goal sit on free cells.
pub fn random_scene<R: Rng>(rng: &mut R, max_side: i32, max_uncertain: usize) -> SemanticScene {
    loop {
        let w = rng.random_range(4..=max_side);
        let h = rng.random_range(4..=max_side);
        let mut objects = Vec::new();
        let add = |rng: &mut R, id: String, t: Traversability| {
            let x0 = rng.random_range(0..w);
            let y0 = rng.random_range(0..h);
            let x1 = (x0 + rng.random_range(0..4)).min(w - 1);
            let y1 = (y0 + rng.random_range(0..6)).min(h - 1);
            SceneObject::new(&id, "thing", cell_box(x0, y0, x1, y1), t)
        };
        for k in 0..rng.random_range(0..=(w * h / 20) as usize) {
            objects.push(add(rng, format!("wall{k}"), Traversability::Known(false)));
        }
        for k in 0..rng.random_range(0..=max_uncertain) {
            let prior = rng.random_range(0.05..0.95);
            objects.push(add(rng, format!("u{k}"), Traversability::Uncertain(prior)));
        }
        let start = Cell::new(rng.random_range(0..w), rng.random_range(0..h));
        let goal = Cell::new(rng.random_range(0..w), rng.random_range(0..h));
        let center = |c: Cell| Point::new(c.x as f64 + 0.5, c.y as f64 + 0.5);
        let inside = |p: Point| {
            objects.iter().any(|o| {
                p.x >= o.aabb.min.x
                    && p.x <= o.aabb.max.x
                    && p.y >= o.aabb.min.y
                    && p.y <= o.aabb.max.y
            })
        };
        if start == goal || inside(center(start)) || inside(center(goal)) {
            continue;
        }
        let scene = SemanticScene {
            grid: GridMap::new(Point::new(0.0, 0.0), 1.0, w as usize, h as usize),
            objects,
            tasks: vec![],
            start: center(start),
            goal: center(goal),
            safety_margin: 0.0,
        };
        if scene.validate().is_ok() {
            return scene;
        }
    }
}

const MOVES: [(i32, i32); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

/// `straight + diagonal * sqrt(2)`, ordered exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Exact {
    pub straight: i64,
    pub diagonal: i64,
}

impl Exact {
    pub fn units(self) -> f64 {
        self.straight as f64 + self.diagonal as f64 * std::f64::consts::SQRT_2
    }
}

impl Ord for Exact {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use std::cmp::Ordering::*;
        let a = self.straight - other.straight;
        let b = self.diagonal - other.diagonal;
        // sign of a + b*sqrt(2)
        match (a.cmp(&0), b.cmp(&0)) {
            (Equal, o) | (o, Equal) => o,
            (Greater, Greater) => Greater,
            (Less, Less) => Less,
            (Greater, Less) => (a * a).cmp(&(2 * b * b)),
            (Less, Greater) => (2 * b * b).cmp(&(a * a)),
        }
    }
}

impl PartialOrd for Exact {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest path with Dijkstra, treating uncertain objects outside
/// `passable` (bits over `occ.uncertain`) as walls. A diagonal move needs
/// both side cells free.
pub fn dijkstra(occ: &Occupancy, start: Cell, goal: Cell, passable: u64) -> Option<Exact> {
    let w = occ.grid.width as i32;
    let h = occ.grid.height as i32;
    let free = |c: Cell| {
        c.x >= 0
            && c.y >= 0
            && c.x < w
            && c.y < h
            && !occ.is_blocked(c)
            && occ.mask(c) & !passable == 0
    };
    if !free(start) {
        return None;
    }
    let idx = |c: Cell| (c.y * w + c.x) as usize;
    let mut dist: Vec<Option<Exact>> = vec![None; (w * h) as usize];
    let mut heap = BinaryHeap::new();
    let zero = Exact {
        straight: 0,
        diagonal: 0,
    };
    dist[idx(start)] = Some(zero);
    heap.push(Reverse((zero, start.x, start.y)));
    while let Some(Reverse((d, x, y))) = heap.pop() {
        let c = Cell::new(x, y);
        if dist[idx(c)] != Some(d) {
            continue;
        }
        if c == goal {
            return Some(d);
        }
        for (dx, dy) in MOVES {
            let n = Cell::new(x + dx, y + dy);
            if !free(n) {
                continue;
            }
            let nd = if dx != 0 && dy != 0 {
                if !free(Cell::new(x + dx, y)) || !free(Cell::new(x, y + dy)) {
                    continue;
                }
                Exact {
                    diagonal: d.diagonal + 1,
                    ..d
                }
            } else {
                Exact {
                    straight: d.straight + 1,
                    ..d
                }
            };
            if dist[idx(n)].is_none_or(|old| nd < old) {
                dist[idx(n)] = Some(nd);
                heap.push(Reverse((nd, n.x, n.y)));
            }
        }
    }
    None
}

pub fn exact(cost: jointplan::search::PathCost) -> Exact {
    Exact {
        straight: cost.straight as i64,
        diagonal: cost.diagonal as i64,
    }
}

/// Cost of running `policy` against one ground truth, in query cost units.
pub fn accrued_cost(
    policy: &QueryPolicy,
    tree: &DecisionTree,
    truth: &BTreeMap<String, bool>,
    costs: CostParams,
) -> f64 {
    let mut belief = policy.initial_belief();
    let mut cost = 0.0;
    loop {
        match next_query(policy, &belief).expect("policy covers every reachable belief") {
            NextStep::Query { objects, .. } => {
                cost += costs.lambda1 + costs.lambda2 * objects.len() as f64;
                let answers: BTreeMap<String, bool> =
                    objects.iter().map(|o| (o.clone(), truth[o])).collect();
                belief = belief
                    .apply_answers(&tree.relevant_ids, &answers)
                    .expect("consistent answers");
            }
            NextStep::Done(_) | NextStep::Infeasible => return cost,
        }
    }
}

/// Samples a configuration from independent priors.
pub fn sample_truth<R: Rng>(rng: &mut R, ids: &[String], priors: &[f64]) -> BTreeMap<String, bool> {
    ids.iter()
        .zip(priors)
        .map(|(id, p)| (id.clone(), rng.random_bool(*p)))
        .collect()
}

/// Mean and standard error of the accrued cost over `samples` draws.
pub fn monte_carlo<R: Rng>(
    rng: &mut R,
    policy: &QueryPolicy,
    tree: &DecisionTree,
    priors: &[f64],
    costs: CostParams,
    samples: usize,
) -> (f64, f64) {
    let mut sum = 0.0;
    let mut sq = 0.0;
    for _ in 0..samples {
        let truth = sample_truth(rng, &tree.relevant_ids, priors);
        let c = accrued_cost(policy, tree, &truth, costs);
        sum += c;
        sq += c * c;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = ((sq - n * mean * mean) / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt())
}

/// Whether the outcome map is feasible somewhere.
pub fn has_path(tree: &DecisionTree) -> bool {
    tree.map.iter().any(|o| matches!(o, Outcome::Path(_)))
}

/// Plays the human side of a mode-1 session: target questions from the
/// scenario's answer key, traversability from `truth`. Returns every
/// message the session sent, ending with `episode_end`.
pub fn drive_session(
    scenario: &jointplan::world::Scenario,
    truth: &BTreeMap<String, bool>,
    strategy: jointplan::sim::Strategy,
) -> Vec<jointplan::session::SessionMessage> {
    use jointplan::session::{Message, Session, SessionMessage};
    let (mut session, mut sent) = Session::mode1(
        1,
        scenario,
        strategy,
        jointplan::sim::Mode1Options::default(),
    )
    .expect("session starts");
    let key = scenario.answer_key.clone().unwrap_or_default();
    let mut seq = 0;
    while !session.is_ended() {
        let last = sent.last().expect("session spoke");
        let reply_to = last.seq.expect("server messages are sequenced");
        let body = match &last.body {
            Message::QueryTarget { description, .. } => Message::AnswerTarget {
                in_reply_to: reply_to,
                object: key.targets[description].clone(),
            },
            Message::QueryTraversability { objects } => Message::AnswerTraversability {
                in_reply_to: reply_to,
                answers: objects.iter().map(|o| (o.clone(), truth[o])).collect(),
            },
            other => panic!("session stalled after {other:?}"),
        };
        seq += 1;
        let out = session.handle_message(&SessionMessage::new(seq, body));
        assert!(out.iter().all(|m| m.body.kind() != "error"), "{out:?}");
        sent.extend(out);
    }
    sent
}

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

/// Checks one random scene's path catalog against exhaustive replanning.
pub fn check_catalog(seed: u64, max_side: i32, max_uncertain: usize) -> Result<(), String> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let scene = random_scene(&mut rng, max_side, max_uncertain);
    let occ = Occupancy::from_scene(&scene).unwrap();
    let start = scene.grid.world_to_cell(scene.start).unwrap();
    let goal = scene.grid.world_to_cell(scene.goal).unwrap();
    let n = occ.uncertain.len();
    let all = (1u64 << n) - 1;

    let catalog = match plan_with_hypotheses(&scene, PlannerConfig::default()) {
        Ok(c) => c,
        Err(SearchError::NoPathUnderAnyHypothesis) => {
            ensure!(
                dijkstra(&occ, start, goal, all).is_none(),
                "planner missed a path"
            );
            return Ok(());
        }
        Err(e) => return Err(e.to_string()),
    };
    ensure!(
        catalog.uncertain_ids == occ.uncertain_ids(),
        "uncertain ids differ"
    );

    for w in catalog.paths.windows(2) {
        ensure!(
            exact(w[0].cost) <= exact(w[1].cost),
            "emission cost decreased"
        );
    }
    for (i, a) in catalog.paths.iter().enumerate() {
        for b in &catalog.paths[i + 1..] {
            ensure!(
                !a.hypothesis.is_subset_of(b.hypothesis),
                "{:?} then {:?}",
                a.hypothesis,
                b.hypothesis
            );
        }
        ensure!(
            swept_mask(&occ, &a.waypoints) == Some(a.hypothesis.0),
            "path sweeps other objects than its hypothesis"
        );
    }

    let cheapest = dijkstra(&occ, start, goal, all).ok_or("catalog without a path")?;
    ensure!(
        exact(catalog.paths[0].cost) == cheapest,
        "first path is not the cheapest"
    );
    if n == 0 {
        ensure!(
            catalog.paths.len() == 1,
            "{} paths with nothing uncertain",
            catalog.paths.len()
        );
    }

    let tree = build_decision_tree(&catalog).map_err(|e| e.to_string())?;
    let all_config = (1u32 << tree.n()) - 1;
    ensure!(
        tree.outcome(all_config) == Outcome::Path(0),
        "all-passable does not map to the cheapest path"
    );

    for config in 0..=all {
        let truth = |id: &str| {
            catalog
                .uncertain_ids
                .iter()
                .position(|u| u == id)
                .map(|k| config >> k & 1 == 1)
        };
        let c = tree.config_of(truth).ok_or("unmapped configuration")?;
        match (tree.outcome(c), dijkstra(&occ, start, goal, config)) {
            (Outcome::Path(i), Some(best)) => {
                let cost = exact(catalog.paths[i].cost);
                ensure!(cost <= best, "config {config:b}: {cost:?} > {best:?}");
                ensure!(
                    catalog.paths[i].hypothesis.0 & !config == 0,
                    "config {config:b}: path crosses a blocked object"
                );
            }
            (Outcome::Infeasible, None) => {}
            (o, r) => return Err(format!("config {config:b}: tree {o:?}, replanned {r:?}")),
        }
    }
    Ok(())
}

/// Random task-selection runs with the belief held below the confidence
/// gate. Returns (ticks with an uncompleted current target, target switches).
pub fn gating_fuzz(sequences: usize, seed: u64) -> (usize, usize) {
    use jointplan::coordination::{select_action, AgentState, CoordinationParams, TaskView};
    use jointplan::intent::IntentBelief;
    use jointplan::world::{Task, TaskKind};
    use rand::SeedableRng;
    use std::collections::BTreeSet;

    let params = CoordinationParams::default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let point = |rng: &mut rand_chacha::ChaCha8Rng| {
        Point::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0))
    };
    let mut switches = 0;
    let mut checked = 0;
    for _ in 0..sequences {
        let n = rng.random_range(3..8);
        let tasks: Vec<Task> = (0..n)
            .map(|i| {
                let kind = if rng.random_bool(0.3) {
                    TaskKind::Cooperative
                } else {
                    TaskKind::Independent
                };
                Task::new(&format!("t{i}"), point(&mut rng), kind)
            })
            .collect();
        let mut completed = BTreeSet::new();
        let mut state = AgentState::new(point(&mut rng));
        let mut human = point(&mut rng);
        let mut now = 0.0;
        for _ in 0..rng.random_range(5..60) {
            if tasks.len() - completed.len() < 3 {
                break;
            }
            // Diffuse belief over the open tasks, every entry below the gate.
            let belief = loop {
                let raw: Vec<f64> = tasks
                    .iter()
                    .map(|t| {
                        if completed.contains(&t.id) {
                            0.0
                        } else {
                            rng.random_range(0.5..1.0)
                        }
                    })
                    .collect();
                let total: f64 = raw.iter().sum();
                if raw.iter().all(|p| p / total < params.tau_intent) {
                    break IntentBelief {
                        probs: tasks
                            .iter()
                            .zip(&raw)
                            .map(|(t, p)| (t.id.clone(), p / total))
                            .collect(),
                    };
                }
            };
            let view = TaskView {
                tasks: &tasks,
                completed: &completed,
                human,
            };
            let before = state.target.clone();
            let d = select_action(&state, &belief, &view, &params, now).unwrap();
            if let Some(prev) = before.filter(|id| !completed.contains(id)) {
                checked += 1;
                if d.target != prev {
                    switches += 1;
                }
            }
            state.record(&d, completed.len(), now);
            let goal = tasks.iter().find(|t| t.id == d.target).unwrap().position;
            state.position = state.position.step_toward(goal, rng.random_range(0.0..1.5));
            human = Point::new(
                human.x + rng.random_range(-1.0..1.0),
                human.y + rng.random_range(-1.0..1.0),
            );
            // Other tasks finish now and then, never the robot's target.
            if rng.random_bool(0.1) {
                if let Some(t) = tasks
                    .iter()
                    .find(|t| !completed.contains(&t.id) && Some(&t.id) != state.target.as_ref())
                {
                    completed.insert(t.id.clone());
                }
            }
            now += rng.random_range(0.1..2.0);
        }
    }
    (checked, switches)
}
