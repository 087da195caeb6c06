//! Belief over two tasks as a human walks toward the first one.

use std::collections::BTreeSet;

use jointplan::intent::{update_belief, HumanTrace, IntentBelief, IntentParams};
use jointplan::world::{Point, Task, TaskKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tasks = vec![
        Task::new("t1", Point::new(2.0, 0.0), TaskKind::Independent),
        Task::new("t2", Point::new(0.0, 2.0), TaskKind::Independent),
    ];
    let none = BTreeSet::new();

    // One step with full replacement: the heading cue alone separates them.
    let sharp = IntentParams {
        gamma: 1.0,
        ..IntentParams::default()
    };
    let b = update_belief(
        &IntentBelief::uniform(&tasks, &none)?,
        &HumanTrace::new(Point::new(0.0, 0.0), Point::new(0.1, 0.0)),
        &tasks,
        &none,
        &sharp,
    )?;
    println!("single step: {:?}", b.probs);

    // Smoothed belief over a short walk.
    let params = IntentParams::default();
    let mut belief = IntentBelief::uniform(&tasks, &none)?;
    let mut pos = Point::new(0.0, 0.0);
    for tick in 1..=10 {
        let next = Point::new(pos.x + 0.1, pos.y + 0.02);
        belief = update_belief(&belief, &HumanTrace::new(pos, next), &tasks, &none, &params)?;
        pos = next;
        let (top, rho) = belief.top().expect("tasks remain");
        println!(
            "tick {tick:2}: t1 {:.3} t2 {:.3} top {top} ({rho:.3})",
            belief.prob("t1"),
            belief.prob("t2")
        );
    }

    // Completing t1 moves all mass to t2.
    let done: BTreeSet<String> = ["t1".to_string()].into();
    belief = update_belief(&belief, &HumanTrace::new(pos, pos), &tasks, &done, &params)?;
    println!("after t1 completes: {:?}", belief.probs);
    Ok(())
}
