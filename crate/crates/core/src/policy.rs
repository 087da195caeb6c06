//! Minimum-expected-cost querying policy.
//!
//! Beliefs are ternary assignments over the tree's relevant objects. At a
//! belief whose consistent outcome set is a singleton the residual cost is
//! zero; elsewhere the policy picks the non-empty query subset `U` of unknown
//! objects minimizing `λ1 + |U|·λ2 + E[V(child)]`, where the expectation runs
//! over all answer vectors for `U` weighted by independent priors.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tree::{submasks, DecisionTree, Outcome};

/// Default cap on the number of relevant objects the DP accepts (3^n table).
pub const DEFAULT_MAX_POLICY_DIM: usize = 12;

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("{n} relevant objects exceed the policy cap of {cap}")]
    DimensionTooLarge { n: usize, cap: usize },
    #[error("prior {prior} of \"{id}\" must lie strictly inside (0, 1)")]
    DegeneratePrior { id: String, prior: f64 },
    #[error("expected {expected} priors, got {got}")]
    PriorCount { expected: usize, got: usize },
    #[error("invalid cost parameters: {0}")]
    InvalidCosts(String),
    #[error("belief {0} is not reachable under this policy")]
    UnreachableBelief(usize),
    #[error("\"{0}\" was already answered")]
    Reanswer(String),
    #[error("\"{0}\" is not a decision-relevant object")]
    UnknownObject(String),
    #[error("answer oracle failed: {0}")]
    Oracle(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ternary {
    Blocked,
    Passable,
    Unknown,
}

impl Ternary {
    fn digit(self) -> usize {
        match self {
            Ternary::Blocked => 0,
            Ternary::Passable => 1,
            Ternary::Unknown => 2,
        }
    }
}

/// Per-object knowledge during querying; canonical index is base 3 with
/// object `k` at weight `3^k` (0 blocked, 1 passable, 2 unknown).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BeliefState {
    n: usize,
    known: u32,
    values: u32,
}

impl BeliefState {
    pub fn unknown(n: usize) -> Self {
        BeliefState {
            n,
            known: 0,
            values: 0,
        }
    }

    pub fn from_ternary(entries: &[Ternary]) -> Self {
        let mut s = BeliefState::unknown(entries.len());
        for (k, t) in entries.iter().enumerate() {
            match t {
                Ternary::Unknown => {}
                Ternary::Passable => {
                    s.known |= 1 << k;
                    s.values |= 1 << k;
                }
                Ternary::Blocked => s.known |= 1 << k,
            }
        }
        s
    }

    pub fn from_index(n: usize, mut index: usize) -> Self {
        let mut s = BeliefState::unknown(n);
        for k in 0..n {
            match index % 3 {
                0 => s.known |= 1 << k,
                1 => {
                    s.known |= 1 << k;
                    s.values |= 1 << k;
                }
                _ => {}
            }
            index /= 3;
        }
        s
    }

    pub fn index(&self) -> usize {
        (0..self.n)
            .rev()
            .fold(0, |acc, k| acc * 3 + self.get(k).digit())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, k: usize) -> Ternary {
        if self.known >> k & 1 == 0 {
            Ternary::Unknown
        } else if self.values >> k & 1 == 1 {
            Ternary::Passable
        } else {
            Ternary::Blocked
        }
    }

    pub fn entries(&self) -> Vec<Ternary> {
        (0..self.n).map(|k| self.get(k)).collect()
    }

    pub fn full_mask(&self) -> u32 {
        if self.n == 32 {
            u32::MAX
        } else {
            (1u32 << self.n) - 1
        }
    }

    pub fn unknown_mask(&self) -> u32 {
        self.full_mask() & !self.known
    }

    pub fn known_mask(&self) -> u32 {
        self.known
    }

    /// Passable bits among known entries.
    pub fn values(&self) -> u32 {
        self.values
    }

    /// Reveals the objects in `mask` with passable bits `bits`.
    pub fn reveal(&self, mask: u32, bits: u32) -> Result<BeliefState, u32> {
        let overlap = mask & self.known;
        if overlap != 0 {
            return Err(overlap);
        }
        Ok(BeliefState {
            n: self.n,
            known: self.known | mask,
            values: self.values | (bits & mask),
        })
    }

    /// Sets the answered objects; fails if any was already known.
    pub fn apply_answers(
        &self,
        ids: &[String],
        answers: &BTreeMap<String, bool>,
    ) -> Result<BeliefState, PolicyError> {
        let mut mask = 0;
        let mut bits = 0;
        for (id, &passable) in answers {
            let k = ids
                .iter()
                .position(|r| r == id)
                .ok_or_else(|| PolicyError::UnknownObject(id.clone()))?;
            if self.known >> k & 1 == 1 {
                return Err(PolicyError::Reanswer(id.clone()));
            }
            mask |= 1 << k;
            if passable {
                bits |= 1 << k;
            }
        }
        Ok(self.reveal(mask, bits).expect("overlap checked above"))
    }
}

/// Free function form of [`BeliefState::apply_answers`].
pub fn apply_answers(
    belief: &BeliefState,
    ids: &[String],
    answers: &BTreeMap<String, bool>,
) -> Result<BeliefState, PolicyError> {
    belief.apply_answers(ids, answers)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    /// Cost of one interaction event.
    pub lambda1: f64,
    /// Cost per object the human verifies.
    pub lambda2: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams {
            lambda1: 10.0,
            lambda2: 1.0,
        }
    }
}

impl CostParams {
    pub fn new(lambda1: f64, lambda2: f64) -> Self {
        CostParams { lambda1, lambda2 }
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.lambda1) || !ok(self.lambda2) {
            return Err(PolicyError::InvalidCosts(
                "lambda1 and lambda2 must be finite and >= 0".into(),
            ));
        }
        if self.lambda1 == 0.0 && self.lambda2 == 0.0 {
            return Err(PolicyError::InvalidCosts(
                "lambda1 and lambda2 cannot both be zero".into(),
            ));
        }
        Ok(())
    }

    pub fn event_cost(&self, objects: usize) -> f64 {
        self.lambda1 + objects as f64 * self.lambda2
    }
}

/// Probability of answer vector `bits` on `mask` under independent priors.
pub(crate) fn answer_weight(priors: &[f64], mask: u32, bits: u32) -> f64 {
    let mut w = 1.0;
    let mut m = mask;
    while m != 0 {
        let k = m.trailing_zeros() as usize;
        w *= if bits >> k & 1 == 1 {
            priors[k]
        } else {
            1.0 - priors[k]
        };
        m &= m - 1;
    }
    w
}

/// Smaller subsets first, then lexicographic by sorted member indices.
pub(crate) fn subset_order(a: u32, b: u32) -> Ordering {
    a.count_ones().cmp(&b.count_ones()).then_with(|| {
        let (mut x, mut y) = (a, b);
        while x != 0 && y != 0 {
            let (i, j) = (x.trailing_zeros(), y.trailing_zeros());
            if i != j {
                return i.cmp(&j);
            }
            x &= x - 1;
            y &= y - 1;
        }
        Ordering::Equal
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyEntry {
    /// Expected residual cost `V(s)`.
    pub value: f64,
    /// Optimal query subset as a mask over relevant ids; `None` when terminal.
    pub action: Option<u32>,
}

/// Solved value and action tables over the reachable beliefs.
#[derive(Debug, Clone)]
pub struct QueryPolicy {
    pub tree: DecisionTree,
    pub priors: Vec<f64>,
    pub costs: CostParams,
    entries: Vec<Option<PolicyEntry>>,
}

struct Solver<'a> {
    tree: &'a DecisionTree,
    priors: &'a [f64],
    costs: CostParams,
    entries: Vec<Option<PolicyEntry>>,
    subsets_by_unknown: BTreeMap<u32, Vec<u32>>,
}

impl Solver<'_> {
    fn ordered_subsets(&mut self, unknown: u32) -> Vec<u32> {
        self.subsets_by_unknown
            .entry(unknown)
            .or_insert_with(|| {
                let mut subs: Vec<u32> = submasks(unknown).filter(|&u| u != 0).collect();
                subs.sort_by(|a, b| subset_order(*a, *b));
                subs
            })
            .clone()
    }

    fn min_cost(&mut self, s: BeliefState) -> f64 {
        let idx = s.index();
        if let Some(e) = self.entries[idx] {
            return e.value;
        }
        if self.tree.determined(&s).is_some() {
            self.entries[idx] = Some(PolicyEntry {
                value: 0.0,
                action: None,
            });
            return 0.0;
        }
        let mut best = f64::INFINITY;
        let mut best_u = 0;
        for u in self.ordered_subsets(s.unknown_mask()) {
            let mut expected = 0.0;
            for bits in submasks(u) {
                let w = answer_weight(self.priors, u, bits);
                let child = s.reveal(u, bits).expect("u is unknown in s");
                expected += w * self.min_cost(child);
            }
            let cost = self.costs.event_cost(u.count_ones() as usize) + expected;
            // Ties keep the earlier (smaller, then lexicographically first) subset.
            if best.is_infinite() || cost < best - 1e-12 * best.abs().max(1.0) {
                best = cost;
                best_u = u;
            }
        }
        self.entries[idx] = Some(PolicyEntry {
            value: best,
            action: Some(best_u),
        });
        best
    }
}

fn check_inputs(
    tree: &DecisionTree,
    priors: &[f64],
    costs: &CostParams,
    cap: usize,
) -> Result<(), PolicyError> {
    let n = tree.n();
    if n > cap {
        return Err(PolicyError::DimensionTooLarge { n, cap });
    }
    if priors.len() != n {
        return Err(PolicyError::PriorCount {
            expected: n,
            got: priors.len(),
        });
    }
    for (id, &p) in tree.relevant_ids.iter().zip(priors) {
        if !(p > 0.0 && p < 1.0) {
            return Err(PolicyError::DegeneratePrior {
                id: id.clone(),
                prior: p,
            });
        }
    }
    costs.validate()
}

/// Solves the Bellman recursion from the all-unknown belief.
pub fn solve_policy(
    tree: &DecisionTree,
    priors: &[f64],
    costs: CostParams,
) -> Result<QueryPolicy, PolicyError> {
    solve_policy_capped(tree, priors, costs, DEFAULT_MAX_POLICY_DIM)
}

pub fn solve_policy_capped(
    tree: &DecisionTree,
    priors: &[f64],
    costs: CostParams,
    cap: usize,
) -> Result<QueryPolicy, PolicyError> {
    check_inputs(tree, priors, &costs, cap)?;
    let n = tree.n();
    let mut solver = Solver {
        tree,
        priors,
        costs,
        entries: vec![None; 3usize.pow(n as u32)],
        subsets_by_unknown: BTreeMap::new(),
    };
    solver.min_cost(BeliefState::unknown(n));
    Ok(QueryPolicy {
        tree: tree.clone(),
        priors: priors.to_vec(),
        costs,
        entries: solver.entries,
    })
}

/// What to do next at a belief.
#[derive(Debug, Clone, PartialEq)]
pub enum NextStep {
    Query { mask: u32, objects: Vec<String> },
    Done(usize),
    Infeasible,
}

impl QueryPolicy {
    pub fn n(&self) -> usize {
        self.tree.n()
    }

    pub fn initial_belief(&self) -> BeliefState {
        BeliefState::unknown(self.n())
    }

    /// `V(s0)`.
    pub fn root_value(&self) -> f64 {
        self.value(&self.initial_belief())
            .expect("root is always solved")
    }

    pub fn entry(&self, belief: &BeliefState) -> Option<PolicyEntry> {
        if belief.n() != self.n() {
            return None;
        }
        self.entries[belief.index()]
    }

    pub fn value(&self, belief: &BeliefState) -> Option<f64> {
        self.entry(belief).map(|e| e.value)
    }

    pub fn ids_of(&self, mask: u32) -> Vec<String> {
        (0..self.n())
            .filter(|k| mask >> k & 1 == 1)
            .map(|k| self.tree.relevant_ids[k].clone())
            .collect()
    }

    /// Solved (belief, entry) pairs in index order.
    pub fn solved(&self) -> impl Iterator<Item = (BeliefState, PolicyEntry)> + '_ {
        let n = self.n();
        self.entries
            .iter()
            .enumerate()
            .filter_map(move |(i, e)| e.map(|e| (BeliefState::from_index(n, i), e)))
    }

    /// Cost of asking about every relevant object in one event.
    pub fn exhaustive_cost(&self) -> f64 {
        if self.tree.determined(&self.initial_belief()).is_some() {
            0.0
        } else {
            self.costs.event_cost(self.n())
        }
    }

    /// JSON export: belief index -> `{value, query}`.
    pub fn to_json(&self) -> serde_json::Value {
        let entries: BTreeMap<String, serde_json::Value> = self
            .solved()
            .map(|(b, e)| {
                (
                    b.index().to_string(),
                    serde_json::json!({
                        "value": e.value,
                        "query": e.action.map(|m| self.ids_of(m)),
                    }),
                )
            })
            .collect();
        serde_json::json!({
            "relevant_ids": self.tree.relevant_ids,
            "priors": self.priors,
            "lambda1": self.costs.lambda1,
            "lambda2": self.costs.lambda2,
            "entries": entries,
        })
    }
}

/// Decides the next query (or the final outcome) at `belief`.
pub fn next_query(policy: &QueryPolicy, belief: &BeliefState) -> Result<NextStep, PolicyError> {
    if belief.n() != policy.n() {
        return Err(PolicyError::UnreachableBelief(belief.index()));
    }
    match policy.tree.determined(belief) {
        Some(Outcome::Path(i)) => return Ok(NextStep::Done(i)),
        Some(Outcome::Infeasible) => return Ok(NextStep::Infeasible),
        None => {}
    }
    match policy.entry(belief).and_then(|e| e.action) {
        Some(mask) => Ok(NextStep::Query {
            mask,
            objects: policy.ids_of(mask),
        }),
        None => Err(PolicyError::UnreachableBelief(belief.index())),
    }
}

#[derive(Debug, Error)]
#[error("{0}")]
pub struct OracleError(pub String);

/// Source of true traversability answers.
pub trait AnswerOracle {
    fn answer(&mut self, objects: &[String]) -> Result<BTreeMap<String, bool>, OracleError>;
}

/// Answers from a fixed ground-truth configuration.
#[derive(Debug, Clone, Default)]
pub struct GroundTruthOracle {
    pub truth: BTreeMap<String, bool>,
}

impl GroundTruthOracle {
    pub fn new(truth: BTreeMap<String, bool>) -> Self {
        GroundTruthOracle { truth }
    }
}

impl AnswerOracle for GroundTruthOracle {
    fn answer(&mut self, objects: &[String]) -> Result<BTreeMap<String, bool>, OracleError> {
        objects
            .iter()
            .map(|id| {
                self.truth
                    .get(id)
                    .map(|&b| (id.clone(), b))
                    .ok_or_else(|| OracleError(format!("no ground truth for \"{id}\"")))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub objects: Vec<String>,
    pub answers: BTreeMap<String, bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub outcome: Outcome,
    pub events: usize,
    pub objects_verified: usize,
    pub cost: f64,
    pub transcript: Vec<QueryRecord>,
    pub final_belief: BeliefState,
}

/// Queries the oracle along the policy until the outcome is determined.
pub fn execute_queries(
    policy: &QueryPolicy,
    oracle: &mut dyn AnswerOracle,
) -> Result<Execution, PolicyError> {
    let ids = &policy.tree.relevant_ids;
    let mut belief = policy.initial_belief();
    let mut transcript = Vec::new();
    let mut objects_verified = 0;
    loop {
        let outcome = match next_query(policy, &belief)? {
            NextStep::Done(i) => Outcome::Path(i),
            NextStep::Infeasible => Outcome::Infeasible,
            NextStep::Query { objects, .. } => {
                let answers = oracle
                    .answer(&objects)
                    .map_err(|e| PolicyError::Oracle(e.0))?;
                if answers.len() != objects.len()
                    || objects.iter().any(|o| !answers.contains_key(o))
                {
                    return Err(PolicyError::Oracle(
                        "answers do not match the queried objects".into(),
                    ));
                }
                belief = belief.apply_answers(ids, &answers)?;
                objects_verified += objects.len();
                transcript.push(QueryRecord { objects, answers });
                continue;
            }
        };
        let events = transcript.len();
        return Ok(Execution {
            outcome,
            events,
            objects_verified,
            cost: events as f64 * policy.costs.lambda1
                + objects_verified as f64 * policy.costs.lambda2,
            transcript,
            final_belief: belief,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    /// One object deciding between two paths.
    fn one_object() -> DecisionTree {
        DecisionTree::from_map(ids(&["o1"]), vec![Outcome::Path(1), Outcome::Path(0)]).unwrap()
    }

    /// Every configuration of two objects leads to its own path.
    fn full_information() -> DecisionTree {
        DecisionTree::from_map(ids(&["o1", "o2"]), (0..4).map(Outcome::Path).collect()).unwrap()
    }

    #[test]
    fn belief_index_round_trip() {
        for n in 0..5 {
            for i in 0..3usize.pow(n as u32) {
                assert_eq!(BeliefState::from_index(n, i).index(), i);
            }
        }
        assert_eq!(BeliefState::unknown(3).index(), 26);
    }

    #[test]
    fn singleton_root_costs_nothing() {
        let t = DecisionTree::from_map(vec![], vec![Outcome::Path(0)]).unwrap();
        let p = solve_policy(&t, &[], CostParams::default()).unwrap();
        assert_eq!(p.root_value(), 0.0);
        assert_eq!(
            next_query(&p, &p.initial_belief()).unwrap(),
            NextStep::Done(0)
        );
    }

    #[test]
    fn one_object_costs_eleven() {
        let p = solve_policy(&one_object(), &[0.5], CostParams::new(10.0, 1.0)).unwrap();
        assert_eq!(p.root_value(), 11.0);
        assert_eq!(
            next_query(&p, &p.initial_belief()).unwrap(),
            NextStep::Query {
                mask: 1,
                objects: ids(&["o1"])
            }
        );
    }

    #[test]
    fn full_information_batches() {
        let p = solve_policy(&full_information(), &[0.3, 0.8], CostParams::new(10.0, 1.0)).unwrap();
        assert!((p.root_value() - 12.0).abs() < 1e-12);
        assert_eq!(p.entry(&p.initial_belief()).unwrap().action, Some(0b11));
        assert_eq!(p.exhaustive_cost(), 12.0);
    }

    #[test]
    fn apply_answers_cases() {
        let names = ids(&["o1", "o2"]);
        let s0 = BeliefState::unknown(2);
        let s1 = s0
            .apply_answers(&names, &[("o1".to_string(), true)].into())
            .unwrap();
        assert_eq!(s1.entries(), vec![Ternary::Passable, Ternary::Unknown]);
        let s2 = s1
            .apply_answers(&names, &[("o2".to_string(), false)].into())
            .unwrap();
        assert_eq!(s2.entries(), vec![Ternary::Passable, Ternary::Blocked]);
        assert_eq!(
            s1.apply_answers(&names, &[("o1".to_string(), false)].into()),
            Err(PolicyError::Reanswer("o1".into()))
        );
    }

    #[test]
    fn next_query_done_after_answer() {
        let p = solve_policy(&one_object(), &[0.5], CostParams::default()).unwrap();
        let b = BeliefState::from_ternary(&[Ternary::Passable]);
        assert_eq!(next_query(&p, &b).unwrap(), NextStep::Done(0));
        assert!(matches!(
            next_query(&p, &BeliefState::unknown(2)),
            Err(PolicyError::UnreachableBelief(_))
        ));
    }

    #[test]
    fn execute_one_object() {
        let p = solve_policy(&one_object(), &[0.5], CostParams::default()).unwrap();
        let mut oracle = GroundTruthOracle::new([("o1".to_string(), true)].into());
        let run = execute_queries(&p, &mut oracle).unwrap();
        assert_eq!(run.outcome, Outcome::Path(0));
        assert_eq!((run.events, run.objects_verified, run.cost), (1, 1, 11.0));
    }

    #[test]
    fn execute_singleton_tree() {
        let t = DecisionTree::from_map(vec![], vec![Outcome::Path(0)]).unwrap();
        let p = solve_policy(&t, &[], CostParams::default()).unwrap();
        let run = execute_queries(&p, &mut GroundTruthOracle::default()).unwrap();
        assert_eq!(
            (run.outcome, run.events, run.cost),
            (Outcome::Path(0), 0, 0.0)
        );
    }

    #[test]
    fn execute_batch_regardless_of_answers() {
        let p = solve_policy(&full_information(), &[0.5, 0.5], CostParams::default()).unwrap();
        for c in 0..4 {
            let truth = [
                ("o1".to_string(), c & 1 == 1),
                ("o2".to_string(), c & 2 == 2),
            ]
            .into();
            let run = execute_queries(&p, &mut GroundTruthOracle::new(truth)).unwrap();
            assert_eq!(run.outcome, Outcome::Path(c));
            assert_eq!((run.events, run.objects_verified, run.cost), (1, 2, 12.0));
        }
    }

    #[test]
    fn input_errors() {
        let t = one_object();
        assert!(matches!(
            solve_policy(&t, &[1.0], CostParams::default()),
            Err(PolicyError::DegeneratePrior { .. })
        ));
        assert!(matches!(
            solve_policy(&t, &[0.5], CostParams::new(0.0, 0.0)),
            Err(PolicyError::InvalidCosts(_))
        ));
        let big = DecisionTree::from_map(
            (0..13).map(|i| format!("o{i}")).collect(),
            vec![Outcome::Path(0); 1 << 13],
        )
        .unwrap();
        assert_eq!(
            solve_policy(&big, &[0.5; 13], CostParams::default()).unwrap_err(),
            PolicyError::DimensionTooLarge { n: 13, cap: 12 }
        );
    }

    #[test]
    fn subset_order_is_size_then_lex() {
        let mut v = vec![0b110, 0b001, 0b011, 0b100, 0b101, 0b010, 0b111];
        v.sort_by(|a, b| subset_order(*a, *b));
        assert_eq!(v, vec![0b001, 0b010, 0b100, 0b011, 0b101, 0b110, 0b111]);
    }

    #[test]
    fn infeasible_only_is_terminal() {
        let t = DecisionTree::from_map(ids(&["a"]), vec![Outcome::Infeasible, Outcome::Path(0)])
            .unwrap();
        let p = solve_policy(&t, &[0.4], CostParams::default()).unwrap();
        let blocked = BeliefState::from_ternary(&[Ternary::Blocked]);
        assert_eq!(next_query(&p, &blocked).unwrap(), NextStep::Infeasible);
        assert_eq!(p.root_value(), 11.0);
    }
}
