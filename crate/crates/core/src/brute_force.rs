//! Exhaustive reference for the querying DP.
//!
//! Enumerates every adaptive querying policy as an explicit tree (query
//! subset at each node, one subtree per answer vector), prices each policy
//! by summing over all `2^n` ground-truth configurations, and keeps the
//! cheapest. Shares nothing with the DP beyond the decision tree itself.

use rand::Rng;

use crate::policy::{BeliefState, CostParams, PolicyError};
use crate::tree::{DecisionTree, Outcome};

/// Largest dimension the enumeration accepts.
pub const MAX_BRUTE_FORCE_DIM: usize = 3;

#[derive(Debug, Clone)]
enum Plan {
    Stop,
    Ask {
        mask: u32,
        /// Indexed by the answer bits restricted to `mask`.
        branches: Vec<(u32, Plan)>,
    },
}

fn non_empty_subsets(mask: u32) -> Vec<u32> {
    (1..=mask).filter(|u| u & !mask == 0).collect()
}

fn answer_vectors(mask: u32) -> Vec<u32> {
    (0..=mask).filter(|b| b & !mask == 0).collect()
}

fn all_plans(tree: &DecisionTree, belief: BeliefState) -> Vec<Plan> {
    if tree.consistent(&belief).len() == 1 {
        return vec![Plan::Stop];
    }
    let mut plans = Vec::new();
    for u in non_empty_subsets(belief.unknown_mask()) {
        // Cartesian product over the answer branches.
        let mut partial: Vec<Vec<(u32, Plan)>> = vec![Vec::new()];
        for bits in answer_vectors(u) {
            let child = belief.reveal(u, bits).expect("u is unknown");
            let options = all_plans(tree, child);
            partial = partial
                .into_iter()
                .flat_map(|prefix| {
                    options.iter().map(move |opt| {
                        let mut next = prefix.clone();
                        next.push((bits, opt.clone()));
                        next
                    })
                })
                .collect();
        }
        plans.extend(
            partial
                .into_iter()
                .map(|branches| Plan::Ask { mask: u, branches }),
        );
    }
    plans
}

fn realized_cost(plan: &Plan, config: u32, costs: &CostParams) -> f64 {
    match plan {
        Plan::Stop => 0.0,
        Plan::Ask { mask, branches } => {
            let answer = config & mask;
            let (_, next) = branches
                .iter()
                .find(|(bits, _)| *bits == answer)
                .expect("every answer vector has a branch");
            costs.lambda1
                + mask.count_ones() as f64 * costs.lambda2
                + realized_cost(next, config, costs)
        }
    }
}

fn config_probability(priors: &[f64], config: u32) -> f64 {
    priors
        .iter()
        .enumerate()
        .map(|(k, p)| if config >> k & 1 == 1 { *p } else { 1.0 - p })
        .product()
}

/// Minimum expected querying cost over all adaptive policies.
pub fn brute_force_value(
    tree: &DecisionTree,
    priors: &[f64],
    costs: CostParams,
) -> Result<f64, PolicyError> {
    let n = tree.n();
    if n > MAX_BRUTE_FORCE_DIM {
        return Err(PolicyError::DimensionTooLarge {
            n,
            cap: MAX_BRUTE_FORCE_DIM,
        });
    }
    if priors.len() != n {
        return Err(PolicyError::PriorCount {
            expected: n,
            got: priors.len(),
        });
    }
    costs.validate()?;
    let plans = all_plans(tree, BeliefState::unknown(n));
    let best = plans
        .iter()
        .map(|plan| {
            (0..1u32 << n)
                .map(|c| config_probability(priors, c) * realized_cost(plan, c, &costs))
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    Ok(best)
}

/// Number of distinct adaptive policies from the all-unknown belief.
pub fn policy_count(tree: &DecisionTree) -> usize {
    all_plans(tree, BeliefState::unknown(tree.n())).len()
}

/// A random decision tree over `n` objects with random priors.
///
/// Half of the instances come from an antichain of random hypothesis sets
/// (the structure the search produces); the rest are arbitrary maps with an
/// occasional infeasible configuration.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, n: usize) -> (DecisionTree, Vec<f64>) {
    let ids: Vec<String> = (0..n).map(|k| format!("o{k}")).collect();
    let size = 1usize << n;
    let map: Vec<Outcome> = if rng.random_bool(0.5) {
        let mut hyps: Vec<u32> = Vec::new();
        for _ in 0..rng.random_range(1..=size.min(5)) {
            let h = rng.random_range(0..size as u32);
            if !hyps.iter().any(|&e| e & !h == 0) {
                hyps.push(h);
            }
        }
        if rng.random_bool(0.7) && !hyps.contains(&0) {
            hyps.push(0);
        }
        (0..size as u32)
            .map(|c| {
                hyps.iter()
                    .position(|&h| h & !c == 0)
                    .map_or(Outcome::Infeasible, Outcome::Path)
            })
            .collect()
    } else {
        let m = rng.random_range(1..=size.min(4));
        (0..size)
            .map(|_| {
                if rng.random_bool(0.1) {
                    Outcome::Infeasible
                } else {
                    Outcome::Path(rng.random_range(0..m))
                }
            })
            .collect()
    };
    let priors = (0..n).map(|_| rng.random_range(0.05..0.95)).collect();
    (
        DecisionTree::from_map(ids, map).expect("well-formed random tree"),
        priors,
    )
}
