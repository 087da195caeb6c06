//! Grounds "the box with the medicine" in the replica room. The description
//! matches two boxes, so the refiner ends up asking which one.

use jointplan::grounding::{
    refine_target, score_candidates, AttributeMatcher, HumanChannel, KnowledgeBase, RefineOptions,
    DEFAULT_TAU,
};
use jointplan::sim::real_world_replica;

struct Operator;

impl HumanChannel for Operator {
    fn ask_target(
        &mut self,
        question: &str,
        _description: &str,
        candidates: &[String],
    ) -> Option<String> {
        println!("robot: {question}");
        let pick = candidates
            .iter()
            .find(|c| c.as_str() == "black_box")
            .cloned();
        println!("human: {}", pick.as_deref().unwrap_or("(no answer)"));
        pick
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scene = real_world_replica().scene;
    let kb = KnowledgeBase::default();
    for description in ["the box with the medicine", "the blue box", "the person"] {
        let set = score_candidates(description, &scene, &kb, &AttributeMatcher, DEFAULT_TAU)?;
        println!("\"{description}\" candidates: {:?}", set.candidates);
        let options = RefineOptions {
            reference: Some(scene.start),
            ..RefineOptions::default()
        };
        let mut operator = Operator;
        let r = refine_target(description, set, &scene, &kb, Some(&mut operator), &options)?;
        println!("-> {} after {} question(s)\n", r.object, r.queries);
    }
    Ok(())
}
