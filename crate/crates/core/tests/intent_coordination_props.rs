mod common;

use std::collections::BTreeSet;
use std::time::Instant;

use jointplan::coordination::{
    is_committed, select_action, AgentState, CoordinationParams, DecisionMode, TaskView,
};
use jointplan::intent::{evidence, update_belief, HumanTrace, IntentBelief, IntentParams};
use jointplan::sim::{
    bundled_layouts, run_mode2_episode, Mode2Options, RobotPolicy, ScriptedHuman,
};
use jointplan::world::{Point, Task, TaskKind};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn point(rng: &mut impl Rng, r: f64) -> Point {
    Point::new(rng.random_range(-r..r), rng.random_range(-r..r))
}

fn random_tasks(rng: &mut impl Rng, n: usize) -> Vec<Task> {
    (0..n)
        .map(|i| {
            let kind = if rng.random_bool(0.3) {
                TaskKind::Cooperative
            } else {
                TaskKind::Independent
            };
            Task::new(&format!("t{i}"), point(rng, 10.0), kind)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn belief_stays_normalized_and_masked(seed in any::<u64>(), n in 1usize..12, steps in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tasks = random_tasks(&mut rng, n);
        let params = IntentParams {
            alpha: rng.random_range(0.01..2.0),
            beta: rng.random_range(0.0..3.0),
            gamma: rng.random_range(0.01..=1.0),
            epsilon: 0.05,
        };
        let mut completed = BTreeSet::new();
        let mut belief = IntentBelief::uniform(&tasks, &completed).unwrap();
        let mut pos = point(&mut rng, 10.0);
        for _ in 0..steps {
            if completed.len() + 1 < n && rng.random_bool(0.2) {
                completed.insert(tasks[rng.random_range(0..n)].id.clone());
            }
            let next = Point::new(pos.x + rng.random_range(-0.2..0.2), pos.y + rng.random_range(-0.2..0.2));
            belief = update_belief(&belief, &HumanTrace::new(pos, next), &tasks, &completed, &params).unwrap();
            pos = next;
            prop_assert!((belief.total() - 1.0).abs() <= 1e-9);
            for id in &completed {
                prop_assert_eq!(belief.prob(id), 0.0);
            }
        }
    }

    #[test]
    fn stronger_heading_means_higher_probability(seed in any::<u64>()) {
        // Two tasks at equal distance; the walker heads closer to the first.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = rng.random_range(0.1..std::f64::consts::PI - 0.1);
        let tasks = vec![
            Task::new("x", Point::new(3.0 * a.cos(), 3.0 * a.sin()), TaskKind::Independent),
            Task::new("y", Point::new(3.0 * a.cos(), -3.0 * a.sin()), TaskKind::Independent),
        ];
        let params = IntentParams { gamma: 1.0, beta: rng.random_range(0.1..3.0), ..IntentParams::default() };
        let tilt = rng.random_range(0.01..a.min(1.0));
        let step = Point::new(0.1 * tilt.cos(), 0.1 * tilt.sin());
        let done = BTreeSet::new();
        let b = update_belief(
            &IntentBelief::uniform(&tasks, &done).unwrap(),
            &HumanTrace::new(Point::new(0.0, 0.0), step),
            &tasks,
            &done,
            &params,
        ).unwrap();
        prop_assert!(b.prob("x") > b.prob("y"));
    }

    #[test]
    fn closer_task_has_more_evidence(seed in any::<u64>(), alpha in 0.01f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let here = point(&mut rng, 5.0);
        let near = rng.random_range(0.5..5.0);
        let far = near + rng.random_range(0.1..5.0);
        let params = IntentParams { alpha, ..IntentParams::default() };
        let trace = HumanTrace::at(here);
        let e_near = evidence(&trace, Point::new(here.x + near, here.y), &params);
        let e_far = evidence(&trace, Point::new(here.x, here.y - far), &params);
        prop_assert!(e_near > e_far);
    }
}

#[test]
fn update_cost_is_linear() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let time = |n: usize, rng: &mut ChaCha8Rng| {
        let tasks = random_tasks(rng, n);
        let done = BTreeSet::new();
        let belief = IntentBelief::uniform(&tasks, &done).unwrap();
        let trace = HumanTrace::new(Point::new(0.0, 0.0), Point::new(0.1, 0.0));
        let reps = 200_000 / n;
        (0..5)
            .map(|_| {
                let t0 = Instant::now();
                for _ in 0..reps {
                    std::hint::black_box(
                        update_belief(&belief, &trace, &tasks, &done, &IntentParams::default())
                            .unwrap(),
                    );
                }
                t0.elapsed().as_secs_f64() / reps as f64
            })
            .fold(f64::INFINITY, f64::min)
    };
    let per = [10usize, 100, 1000].map(|n| time(n, &mut rng) / n as f64);
    let (lo, hi) = per.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    });
    // Per-task cost may shrink with n as fixed overhead amortizes; it must not grow.
    assert!(
        per[2] <= 2.0 * per[0].max(per[1]),
        "per-task cost {per:?} ({lo}..{hi})"
    );
}

#[test]
fn gate_holds_target_under_low_confidence() {
    let (checked, switches) = common::gating_fuzz(1000, 11);
    assert!(checked > 10_000, "only {checked} ticks checked");
    assert_eq!(switches, 0);
}

#[test]
fn commitment_and_complement_rules() {
    let params = CoordinationParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5000 {
        let n = rng.random_range(2..7);
        let tasks = random_tasks(&mut rng, n);
        let completed = BTreeSet::new();
        let human = point(&mut rng, 10.0);
        let view = TaskView {
            tasks: &tasks,
            completed: &completed,
            human,
        };
        let mut state = AgentState::new(point(&mut rng, 10.0));
        state.target = Some(tasks[rng.random_range(0..n)].id.clone());
        let raw: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0.0..1.0f64).powi(4) + 1e-6)
            .collect();
        let total: f64 = raw.iter().sum();
        let belief = IntentBelief {
            probs: tasks
                .iter()
                .zip(&raw)
                .map(|(t, p)| (t.id.clone(), p / total))
                .collect(),
        };
        let d = select_action(&state, &belief, &view, &params, 0.0).unwrap();
        if is_committed(&state, &view, params.r_commit) {
            assert_eq!(Some(&d.target), state.target.as_ref());
            assert!(matches!(
                d.mode,
                DecisionMode::KeepCurrent | DecisionMode::WaitAtTarget
            ));
        }
        if d.mode == DecisionMode::ComplementIndependent {
            let (top, rho) = belief.top().unwrap();
            assert!(rho >= params.tau_intent);
            assert_ne!(d.target, top);
            let independents = tasks
                .iter()
                .filter(|t| t.kind == TaskKind::Independent)
                .count();
            assert!(independents >= 2);
        }
    }
}

#[test]
fn waits_are_bounded_and_episodes_end() {
    let options = Mode2Options::default();
    let dt = options.tick_dt;
    for layout in bundled_layouts() {
        for (label, human) in ScriptedHuman::cases(&layout) {
            for policy in [RobotPolicy::Intent, RobotPolicy::Nearest] {
                let log = run_mode2_episode(&layout, &human, policy, &options).unwrap();
                assert!(log.finished, "{} {label} {policy}", layout.name);
                let mut run = 0;
                for tick in &log.ticks {
                    if tick.decision.mode == DecisionMode::WaitAtTarget {
                        run += 1;
                        let limit = options.coordination.wait_timeout + dt;
                        assert!(
                            run as f64 * dt <= limit + 1e-9,
                            "{} {label}: waited {run} ticks",
                            layout.name
                        );
                    } else {
                        run = 0;
                    }
                }
            }
        }
    }
}

#[test]
fn scripted_human_stuck_forever_still_ends() {
    // A human that never moves: the robot must still finish what it can
    // alone, and the episode ends at the tick budget.
    let layout = &bundled_layouts()[0];
    let frozen = ScriptedHuman {
        speed: 1e-9,
        ..ScriptedHuman::rational(layout.plans[0].clone())
    };
    let options = Mode2Options {
        max_ticks: 400,
        ..Mode2Options::default()
    };
    let log = run_mode2_episode(layout, &frozen, RobotPolicy::Intent, &options).unwrap();
    assert!(!log.finished);
    assert_eq!(log.ticks.len(), 400);
    let done: Vec<&String> = log.ticks.iter().flat_map(|t| &t.completed).collect();
    let independents = layout
        .tasks
        .iter()
        .filter(|t| t.kind == TaskKind::Independent)
        .count();
    assert_eq!(done.len(), independents);
}
