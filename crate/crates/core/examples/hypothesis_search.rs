//! Hypothesis-augmented search on the 5x3 grid with one uncertain crate,
//! then the same corridor map the benchmarks use.

use jointplan::search::{plan_with_hypotheses, PlannerConfig};
use jointplan::sim::{bundled_mode1_suite, worked_example};
use jointplan::tree::build_decision_tree;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scene = worked_example().scene;
    let catalog = plan_with_hypotheses(&scene, PlannerConfig::default())?;
    println!("5x3 grid, uncertain: {:?}", catalog.uncertain_ids);
    for (i, p) in catalog.paths.iter().enumerate() {
        println!(
            "  path {i}: {:.2} m assuming {:?} passable, {} cells",
            catalog.cost_m(i),
            p.hypothesis.ids(&catalog.uncertain_ids),
            p.waypoints.len()
        );
    }
    let tree = build_decision_tree(&catalog)?;
    for config in 0..1u32 << tree.n() {
        println!(
            "  configuration {config:0w$b} -> {}",
            tree.outcome(config),
            w = tree.n()
        );
    }

    let (name, corridors) = bundled_mode1_suite()
        .into_iter()
        .find(|(n, _)| n == "complex-corridors")
        .expect("bundled");
    let catalog = plan_with_hypotheses(&corridors.scene, PlannerConfig::default())?;
    println!("\n{name}: {} candidate paths", catalog.paths.len());
    for (i, p) in catalog.paths.iter().enumerate() {
        println!(
            "  path {i}: {:.2} m via {:?}",
            catalog.cost_m(i),
            p.hypothesis.ids(&catalog.uncertain_ids)
        );
    }
    Ok(())
}
