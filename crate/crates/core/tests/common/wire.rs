//! Proptest strategies over every wire message kind.

use jointplan::coordination::DecisionMode;
use jointplan::session::{EndStatus, Message, SessionMode};
use jointplan::sim::worked_example;
use jointplan::world::{Point, Task, TaskKind};
use proptest::prelude::*;

pub fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        any::<f64>().prop_filter("finite", |x| x.is_finite()),
        -1e3f64..1e3
    ]
}

pub fn point() -> impl Strategy<Value = Point> {
    (finite(), finite()).prop_map(|(x, y)| Point::new(x, y))
}

pub fn id() -> impl Strategy<Value = String> {
    "[a-z_][a-z0-9_ \"\\\\é]{0,8}"
}

pub fn task() -> impl Strategy<Value = Task> {
    (id(), point(), any::<bool>()).prop_map(|(id, p, coop)| {
        Task::new(
            &id,
            p,
            if coop {
                TaskKind::Cooperative
            } else {
                TaskKind::Independent
            },
        )
    })
}

pub fn decision_mode() -> impl Strategy<Value = DecisionMode> {
    prop_oneof![
        Just(DecisionMode::PursueCooperative),
        Just(DecisionMode::ComplementIndependent),
        Just(DecisionMode::PursueIndependent),
        Just(DecisionMode::KeepCurrent),
        Just(DecisionMode::NearestFallback),
        Just(DecisionMode::WaitAtTarget),
    ]
}

pub fn end_status() -> impl Strategy<Value = EndStatus> {
    prop_oneof![
        Just(EndStatus::Planned),
        Just(EndStatus::Failed),
        Just(EndStatus::Completed),
        Just(EndStatus::OutOfTicks),
    ]
}

pub fn message() -> impl Strategy<Value = Message> {
    let points = || prop::collection::vec(point(), 0..5);
    let ids = || prop::collection::vec(id(), 0..4);
    prop_oneof![
        (
            any::<u64>(),
            any::<bool>(),
            any::<bool>(),
            prop::collection::vec(task(), 0..4),
            point(),
            point()
        )
            .prop_map(|(session, m1, with_scene, tasks, human, robot)| {
                Message::ScenarioLoaded {
                    session,
                    mode: if m1 {
                        SessionMode::Mode1
                    } else {
                        SessionMode::Mode2
                    },
                    scene: with_scene.then(|| worked_example().scene),
                    tasks,
                    human,
                    robot,
                }
            }),
        (finite(), point(), point(), ids(), points()).prop_map(
            |(t, human, robot, completed, path)| {
                Message::StateUpdate {
                    t,
                    human,
                    robot,
                    completed,
                    path,
                }
            }
        ),
        (
            prop::collection::btree_map(id(), 0.0f64..=1.0, 0..4),
            id(),
            0.0f64..=1.0
        )
            .prop_map(|(probs, top, rho)| Message::BeliefUpdate { probs, top, rho }),
        (id(), decision_mode(), prop::option::of(id())).prop_map(|(target, mode, released)| {
            Message::RobotDecision {
                target,
                mode,
                released,
            }
        }),
        (id(), id(), ids()).prop_map(|(description, question, candidates)| Message::QueryTarget {
            description,
            question,
            candidates
        }),
        (any::<u64>(), id()).prop_map(|(in_reply_to, object)| Message::AnswerTarget {
            in_reply_to,
            object
        }),
        ids().prop_map(|objects| Message::QueryTraversability { objects }),
        (
            any::<u64>(),
            prop::collection::btree_map(id(), any::<bool>(), 0..4)
        )
            .prop_map(|(in_reply_to, answers)| Message::AnswerTraversability {
                in_reply_to,
                answers
            }),
        point().prop_map(|pos| Message::HumanMove { pos }),
        (end_status(), prop::option::of(id()), finite(), points()).prop_map(
            |(status, reason, t, path)| Message::EpisodeEnd {
                status,
                reason,
                t,
                path
            }
        ),
        (id(), prop::option::of(any::<u64>())).prop_map(|(message, in_reply_to)| Message::Error {
            message,
            in_reply_to
        }),
    ]
}
