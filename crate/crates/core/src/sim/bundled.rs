//! Scenarios and layouts shipped with the crate.

use std::collections::BTreeMap;

use super::mode2::Layout;
use crate::world::{
    Aabb, ActionKind, AnswerKey, Cell, GridMap, Instruction, Point, Scenario, SceneObject,
    SemanticScene, Task, TaskKind, Traversability,
};

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Aabb {
    Aabb::new(Point::new(x0, y0), Point::new(x1, y1))
}

fn square(cx: f64, cy: f64, half: f64) -> Aabb {
    rect(cx - half, cy - half, cx + half, cy + half)
}

fn uncertain(id: &str, name: &str, aabb: Aabb, prior: f64) -> SceneObject {
    SceneObject::new(id, name, aabb, Traversability::Uncertain(prior))
}

fn solid(id: &str, name: &str, aabb: Aabb) -> SceneObject {
    SceneObject::new(id, name, aabb, Traversability::Known(false))
}

fn wall_cells(
    xs: std::ops::Range<i32>,
    ys: std::ops::Range<i32>,
    gaps: &[std::ops::Range<i32>],
) -> Vec<Cell> {
    let mut cells = Vec::new();
    for x in xs {
        for y in ys.clone() {
            if !gaps.iter().any(|g| g.contains(&y)) {
                cells.push(Cell::new(x, y));
            }
        }
    }
    cells
}

fn truth(pairs: &[(&str, bool)]) -> BTreeMap<String, bool> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn answers(pairs: &[(&str, &str)]) -> AnswerKey {
    AnswerKey {
        targets: pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect(),
    }
}

/// The one-object 5×3 example: a direct route through `o1` or a detour.
pub fn worked_example() -> Scenario {
    let scene = SemanticScene {
        grid: GridMap::new(Point::new(0.0, 0.0), 1.0, 5, 3),
        objects: vec![uncertain("o1", "crate", rect(2.5, 0.5, 2.5, 1.5), 0.5)],
        tasks: vec![],
        start: Point::new(0.5, 1.5),
        goal: Point::new(4.5, 1.5),
        safety_margin: 0.0,
    };
    Scenario {
        ground_truth: Some(truth(&[("o1", true)])),
        ..Scenario::from_scene(scene)
    }
}

const GAP_NAMES: [&str; 6] = ["net", "smoke", "curtain", "cable", "debris", "foliage"];
const PRIORS: [f64; 7] = [0.3, 0.6, 0.8, 0.2, 0.5, 0.7, 0.4];

/// A 12 m × 6 m room split by a wall with a middle gap, a top gap and
/// sometimes a bottom gap; uncertain objects sit in some of the gaps and in
/// corners away from any route.
fn simple_scenario(i: usize) -> (String, Scenario) {
    let variant = i % 5;
    let bottom_gap = variant == 2 || variant == 1;
    let mut gaps = vec![5..7, 10..12];
    if bottom_gap {
        gaps.push(0..2);
    }
    let mut grid = GridMap::new(Point::new(0.0, 0.0), 0.5, 24, 12);
    grid.static_blocked = wall_cells(11..13, 0..12, &gaps).into_iter().collect();

    let name = GAP_NAMES[i % GAP_NAMES.len()];
    let prior = PRIORS[i % PRIORS.len()];
    let mut objects = vec![uncertain("gap_mid", name, rect(5.6, 2.6, 6.4, 3.4), prior)];
    let mid_open = i % 3 != 1;
    let mut gt = vec![("gap_mid", mid_open)];
    match variant {
        1 => {
            objects.push(uncertain("gap_top", "smoke", rect(5.6, 5.1, 6.4, 5.9), 0.5));
            gt.push(("gap_top", i.is_multiple_of(2)));
        }
        2 => {
            objects.push(uncertain(
                "gap_low",
                "debris",
                rect(5.6, 0.1, 6.4, 0.9),
                0.4,
            ));
            gt.push(("gap_low", true));
        }
        3 => {
            // No unconditional route: the top gap is uncertain too, and open.
            grid.static_blocked = wall_cells(11..13, 0..12, &[5..7, 10..12])
                .into_iter()
                .collect();
            objects.push(uncertain(
                "gap_top",
                "foliage",
                rect(5.6, 5.1, 6.4, 5.9),
                0.6,
            ));
            gt.push(("gap_top", true));
        }
        4 => {
            objects.push(uncertain(
                "gap_mid2",
                "cable",
                rect(6.3, 2.6, 6.45, 3.4),
                0.5,
            ));
            gt.push(("gap_mid2", true));
        }
        _ => {}
    }
    objects.push(uncertain("puddle", "puddle", rect(0.3, 0.3, 1.2, 1.2), 0.5));
    gt.push(("puddle", i % 2 == 1));
    if i.is_multiple_of(2) {
        objects.push(uncertain("tarp", "tarp", rect(10.8, 4.8, 11.7, 5.7), 0.5));
        gt.push(("tarp", false));
    }

    let mut scenario_name = format!("simple-{:02}-{name}", i + 1);
    let mut instruction = None;
    let mut key = None;
    let mut goal = Point::new(10.75, 3.25);
    if i % 4 == 1 {
        // Two indistinguishable boxes; the wanted one is not the closer one.
        objects.push(
            solid("black_box", "box", square(9.0, 1.25, 0.2)).with_attribute("color", "black"),
        );
        objects
            .push(solid("blue_box", "box", square(9.0, 4.75, 0.2)).with_attribute("color", "blue"));
        objects.push(
            solid("person", "person", square(11.0, 4.0, 0.25)).with_attribute("state", "injured"),
        );
        instruction = Some(Instruction::new(
            "Pick up the box with medicine and deliver it to the person.",
            vec![
                Instruction::step(ActionKind::PickUp, Some("the box with medicine")),
                Instruction::step(ActionKind::Deliver, Some("the person")),
            ],
        ));
        key = Some(answers(&[
            ("the box with medicine", "black_box"),
            ("the person", "person"),
        ]));
        goal = Point::new(10.75, 1.75);
        scenario_name.push_str("-ambiguous");
    } else if i % 4 == 3 {
        objects.push(
            solid("person", "person", square(11.0, 4.0, 0.25)).with_attribute("state", "injured"),
        );
        instruction = Some(Instruction::new(
            "Bring the first-aid kit to the injured person.",
            vec![Instruction::step(
                ActionKind::Deliver,
                Some("the injured person"),
            )],
        ));
        key = Some(answers(&[("the injured person", "person")]));
        goal = Point::new(10.75, 1.75);
    }

    let scene = SemanticScene {
        grid,
        objects,
        tasks: vec![],
        start: Point::new(1.25, 3.25),
        goal,
        safety_margin: 0.25,
    };
    let scenario = Scenario {
        scene,
        instruction,
        answer_key: key,
        ground_truth: Some(truth(&gt)),
    };
    (scenario_name, scenario)
}

/// 20 m × 12 m map with three corridors through a thick wall: a short one
/// holding two hazards in series, a middle-length one holding one, and a
/// long clear one.
fn corridor_map() -> (GridMap, Vec<SceneObject>) {
    let mut grid = GridMap::new(Point::new(0.0, 0.0), 0.5, 40, 24);
    grid.static_blocked = wall_cells(15..25, 0..24, &[2..4, 11..13, 17..19])
        .into_iter()
        .collect();
    let objects = vec![
        uncertain("fire", "fire", rect(8.6, 5.6, 9.4, 6.4), 0.05),
        uncertain("net", "net", rect(10.6, 5.6, 11.4, 6.4), 0.5),
        uncertain("smoke", "smoke", rect(9.6, 8.6, 10.4, 9.4), 0.5),
        uncertain("puddle", "puddle", rect(0.3, 10.6, 1.2, 11.5), 0.5),
        uncertain("tarp", "tarp", rect(18.6, 0.3, 19.5, 1.2), 0.5),
    ];
    (grid, objects)
}

fn corridor_truth() -> BTreeMap<String, bool> {
    truth(&[
        ("fire", false),
        ("net", true),
        ("smoke", true),
        ("puddle", true),
        ("tarp", false),
    ])
}

fn fire_net_smoke() -> (String, Scenario) {
    let (grid, objects) = corridor_map();
    let scene = SemanticScene {
        grid,
        objects,
        tasks: vec![],
        start: Point::new(1.25, 6.25),
        goal: Point::new(18.75, 6.25),
        safety_margin: 0.25,
    };
    let scenario = Scenario {
        ground_truth: Some(corridor_truth()),
        ..Scenario::from_scene(scene)
    };
    ("complex-corridors".into(), scenario)
}

fn corridor_delivery() -> (String, Scenario) {
    let (grid, mut objects) = corridor_map();
    objects
        .push(solid("red_crate", "crate", square(15.0, 10.5, 0.3)).with_attribute("color", "red"));
    objects.push(
        solid("green_crate", "crate", square(17.5, 3.0, 0.3)).with_attribute("color", "green"),
    );
    objects
        .push(solid("person", "person", square(18.5, 8.0, 0.3)).with_attribute("state", "injured"));
    let scene = SemanticScene {
        grid,
        objects,
        tasks: vec![],
        start: Point::new(1.25, 6.25),
        goal: Point::new(18.75, 6.25),
        safety_margin: 0.25,
    };
    let scenario = Scenario {
        scene,
        instruction: Some(Instruction::new(
            "Take the crate with the tools to the person, then come back.",
            vec![
                Instruction::step(ActionKind::PickUp, Some("the crate with the tools")),
                Instruction::step(ActionKind::Deliver, Some("the person")),
                Instruction::step(ActionKind::Return, None),
            ],
        )),
        answer_key: Some(answers(&[
            ("the crate with the tools", "green_crate"),
            ("the person", "person"),
        ])),
        ground_truth: Some(corridor_truth()),
    };
    ("complex-corridor-delivery-ambiguous".into(), scenario)
}

/// The 12 m × 6 m real-world room with its five measured objects.
fn replica_scene() -> SemanticScene {
    let mut blue =
        solid("blue_box", "box", rect(7.39, -1.04, 7.64, -0.68)).with_attribute("color", "blue");
    blue.detection_confidence = 0.8147;
    let mut black =
        solid("black_box", "box", rect(-0.02, -0.09, 0.47, 0.30)).with_attribute("color", "black");
    black.detection_confidence = 0.6342;
    let mut person =
        solid("person", "person", rect(4.89, 0.58, 6.53, 1.21)).with_attribute("state", "injured");
    person.detection_confidence = 0.5336;
    let mut yellow = uncertain("yellow_box", "box", rect(5.10, -1.30, 5.70, -0.62), 0.2)
        .with_attribute("color", "yellow");
    yellow.detection_confidence = 0.4644;
    let mut net = uncertain("net", "net", rect(3.02, 0.49, 3.66, 1.17), 0.3);
    net.detection_confidence = 0.3371;
    SemanticScene {
        grid: GridMap::new(Point::new(-1.5, -3.0), 0.2, 60, 30),
        objects: vec![blue, black, person, yellow, net],
        tasks: vec![],
        start: Point::new(4.5, -2.2),
        goal: Point::new(9.5, 2.0),
        safety_margin: 0.25,
    }
}

fn replica(command: usize) -> (String, Scenario) {
    let (text, steps, key): (&str, Vec<_>, Vec<(&str, &str)>) = match command {
        0 => (
            "Get the medicine from the box and deliver it to the person.",
            vec![
                Instruction::step(ActionKind::PickUp, Some("the box with the medicine")),
                Instruction::step(ActionKind::Deliver, Some("the person")),
            ],
            vec![("the box with the medicine", "black_box"), ("the person", "person")],
        ),
        1 => (
            "Pick up the medicine from the box, deliver it to the person and back to your initial position.",
            vec![
                Instruction::step(ActionKind::PickUp, Some("the box with the medicine")),
                Instruction::step(ActionKind::Deliver, Some("the person")),
                Instruction::step(ActionKind::Return, None),
            ],
            vec![("the box with the medicine", "black_box"), ("the person", "person")],
        ),
        _ => (
            "Pick up medicine from the black box and then take the bandage from the blue box and deliver both of them to the person.",
            vec![
                Instruction::step(ActionKind::PickUp, Some("the black box")),
                Instruction::step(ActionKind::PickUp, Some("the blue box")),
                Instruction::step(ActionKind::Deliver, Some("the person")),
            ],
            vec![
                ("the black box", "black_box"),
                ("the blue box", "blue_box"),
                ("the person", "person"),
            ],
        ),
    };
    let scenario = Scenario {
        scene: replica_scene(),
        instruction: Some(Instruction::new(text, steps)),
        answer_key: Some(answers(&key)),
        ground_truth: Some(truth(&[("yellow_box", false), ("net", false)])),
    };
    let name = match command {
        0 => "replica-deliver-ambiguous",
        1 => "replica-deliver-return-ambiguous",
        _ => "replica-two-boxes",
    };
    (name.to_string(), scenario)
}

/// The real-world room with the first command (box unspecified).
pub fn real_world_replica() -> Scenario {
    replica(0).1
}

/// 20 simple and 5 complex scenarios with ground truth and answer keys.
pub fn bundled_mode1_suite() -> Vec<(String, Scenario)> {
    let mut out: Vec<(String, Scenario)> = (0..20).map(simple_scenario).collect();
    out.push(fire_net_smoke());
    out.push(corridor_delivery());
    out.extend((0..3).map(replica));
    out
}

fn ids(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// Four layouts, each with two independent tasks and one cooperative task.
pub fn bundled_layouts() -> Vec<Layout> {
    let t = |id: &str, x: f64, y: f64, kind: TaskKind| Task::new(id, Point::new(x, y), kind);
    vec![
        Layout {
            name: "fork".into(),
            human_start: Point::new(0.0, 0.0),
            robot_start: Point::new(0.0, 0.3),
            tasks: vec![
                t("A", 4.0, 3.0, TaskKind::Independent),
                t("B", 4.0, -3.0, TaskKind::Independent),
                t("C", 8.0, 0.0, TaskKind::Cooperative),
            ],
            r_commit: 1.5,
            plans: vec![ids(&["A", "C", "B"]), ids(&["B", "C", "A"])],
        },
        Layout {
            name: "wide".into(),
            human_start: Point::new(0.0, 0.0),
            robot_start: Point::new(0.0, 0.3),
            tasks: vec![
                t("A", -5.0, 4.0, TaskKind::Independent),
                t("B", 5.0, 4.0, TaskKind::Independent),
                t("C", 0.0, 9.0, TaskKind::Cooperative),
            ],
            r_commit: 1.5,
            plans: vec![ids(&["A", "C", "B"]), ids(&["B", "C", "A"])],
        },
        Layout {
            name: "offset".into(),
            human_start: Point::new(0.0, 0.0),
            robot_start: Point::new(0.0, 0.3),
            tasks: vec![
                t("A", 6.0, 1.0, TaskKind::Independent),
                t("B", 2.0, 6.0, TaskKind::Independent),
                t("C", 7.0, 7.0, TaskKind::Cooperative),
            ],
            r_commit: 1.5,
            plans: vec![ids(&["A", "C", "B"]), ids(&["B", "C", "A"])],
        },
        Layout {
            name: "room".into(),
            human_start: Point::new(3.0, -2.5),
            robot_start: Point::new(3.5, -2.5),
            tasks: vec![
                t("black_box", 0.2, 0.1, TaskKind::Independent),
                t("blue_box", 7.5, -0.86, TaskKind::Independent),
                t("person", 5.7, 0.9, TaskKind::Cooperative),
            ],
            r_commit: 1.0,
            plans: vec![
                ids(&["black_box", "person", "blue_box"]),
                ids(&["blue_box", "person", "black_box"]),
            ],
        },
    ]
}

/// A bundled layout by name.
pub fn bundled_layout(name: &str) -> Option<Layout> {
    bundled_layouts().into_iter().find(|l| l.name == name)
}
