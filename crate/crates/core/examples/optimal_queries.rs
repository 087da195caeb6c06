//! Solves the query policy for a decision tree and compares it with asking
//! about every object at once.

use jointplan::policy::{next_query, solve_policy, CostParams, NextStep};
use jointplan::tree::{DecisionTree, Outcome};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let costs = CostParams::new(10.0, 1.0);

    // Two objects, each opening its own route; a third route is always there.
    let tree = DecisionTree::from_map(
        vec!["net".into(), "smoke".into()],
        vec![
            Outcome::Path(2),
            Outcome::Path(0),
            Outcome::Path(1),
            Outcome::Path(0),
        ],
    )?;
    let policy = solve_policy(&tree, &[0.5, 0.5], costs)?;
    println!(
        "expected cost {} vs {} for asking everything",
        policy.root_value(),
        policy.exhaustive_cost()
    );

    let mut belief = policy.initial_belief();
    let truth = [false, true];
    loop {
        match next_query(&policy, &belief)? {
            NextStep::Query { objects, .. } => {
                let answers: std::collections::BTreeMap<String, bool> = objects
                    .iter()
                    .map(|id| (id.clone(), truth[tree.position(id).expect("relevant")]))
                    .collect();
                println!("ask {objects:?} -> {answers:?}");
                belief = belief.apply_answers(&tree.relevant_ids, &answers)?;
            }
            NextStep::Done(i) => {
                println!("take path {i}");
                break;
            }
            NextStep::Infeasible => {
                println!("no feasible path");
                break;
            }
        }
    }

    // A single object with a fallback: one question decides it.
    let one = DecisionTree::from_map(
        vec!["crate".into()],
        vec![Outcome::Infeasible, Outcome::Path(0)],
    )?;
    let p = solve_policy(&one, &[0.5], costs)?;
    println!("one-object tree: {}", p.root_value());
    Ok(())
}
