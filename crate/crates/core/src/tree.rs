//! Decision tree over traversability configurations.
//!
//! Configuration `c` is a bit vector over `relevant_ids` (bit `k` set means
//! `relevant_ids[k]` is passable). The tree maps each of the `2^n`
//! configurations to the first catalog path whose hypothesis it satisfies.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::policy::BeliefState;
use crate::search::CandidatePathCatalog;

/// Largest tree dimension (the map has `2^n` entries).
pub const MAX_TREE_DIM: usize = 16;

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("{n} decision-relevant objects exceed the tree cap of {cap}")]
    TooManyRelevant { n: usize, cap: usize },
    #[error("map has {got} entries, expected {expected}")]
    MapLength { expected: usize, got: usize },
    #[error("duplicate relevant id \"{0}\"")]
    DuplicateId(String),
}

/// What the tree yields for a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    /// Index into the candidate-path catalog.
    Path(usize),
    /// No catalog path is valid under the configuration.
    Infeasible,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Path(i) => write!(f, "path{i}"),
            Outcome::Infeasible => f.write_str("infeasible"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum OutcomeRepr {
    Path(usize),
    Label(String),
}

impl Serialize for Outcome {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Outcome::Path(i) => OutcomeRepr::Path(*i),
            Outcome::Infeasible => OutcomeRepr::Label("infeasible".into()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Outcome {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match OutcomeRepr::deserialize(d)? {
            OutcomeRepr::Path(i) => Ok(Outcome::Path(i)),
            OutcomeRepr::Label(l) if l == "infeasible" => Ok(Outcome::Infeasible),
            OutcomeRepr::Label(l) => {
                Err(serde::de::Error::custom(format!("unknown outcome \"{l}\"")))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub relevant_ids: Vec<String>,
    pub map: Vec<Outcome>,
}

/// Iterates every submask of `mask`, including 0 and `mask` itself.
pub(crate) fn submasks(mask: u32) -> impl Iterator<Item = u32> {
    let mut next = Some(mask);
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == 0 {
            None
        } else {
            Some((cur - 1) & mask)
        };
        Some(cur)
    })
}

impl DecisionTree {
    pub fn from_map(relevant_ids: Vec<String>, map: Vec<Outcome>) -> Result<Self, TreeError> {
        let n = relevant_ids.len();
        if n > MAX_TREE_DIM {
            return Err(TreeError::TooManyRelevant {
                n,
                cap: MAX_TREE_DIM,
            });
        }
        let mut seen = BTreeSet::new();
        for id in &relevant_ids {
            if !seen.insert(id) {
                return Err(TreeError::DuplicateId(id.clone()));
            }
        }
        if map.len() != 1 << n {
            return Err(TreeError::MapLength {
                expected: 1 << n,
                got: map.len(),
            });
        }
        Ok(DecisionTree { relevant_ids, map })
    }

    pub fn n(&self) -> usize {
        self.relevant_ids.len()
    }

    pub fn outcome(&self, config: u32) -> Outcome {
        self.map[config as usize]
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.relevant_ids.iter().position(|r| r == id)
    }

    /// Outcomes reachable from every completion of `belief`.
    pub fn consistent(&self, belief: &BeliefState) -> BTreeSet<Outcome> {
        assert_eq!(belief.n(), self.n(), "belief dimension must match the tree");
        submasks(belief.unknown_mask())
            .map(|free| self.outcome(belief.values() | free))
            .collect()
    }

    /// The single outcome shared by all completions, if there is one.
    pub fn determined(&self, belief: &BeliefState) -> Option<Outcome> {
        assert_eq!(belief.n(), self.n(), "belief dimension must match the tree");
        let mut completions = submasks(belief.unknown_mask());
        let first = self.outcome(belief.values() | completions.next()?);
        completions
            .all(|free| self.outcome(belief.values() | free) == first)
            .then_some(first)
    }

    /// Configuration bits for a full assignment given by id.
    pub fn config_of(&self, truth: impl Fn(&str) -> Option<bool>) -> Option<u32> {
        let mut c = 0u32;
        for (k, id) in self.relevant_ids.iter().enumerate() {
            if truth(id)? {
                c |= 1 << k;
            }
        }
        Some(c)
    }
}

/// Maps every configuration to the first catalog path it satisfies.
pub fn build_decision_tree(catalog: &CandidatePathCatalog) -> Result<DecisionTree, TreeError> {
    let union = catalog
        .paths
        .iter()
        .fold(0u64, |acc, p| acc | p.hypothesis.0);
    let relevant: Vec<usize> = (0..64).filter(|i| union >> i & 1 == 1).collect();
    let n = relevant.len();
    if n > MAX_TREE_DIM {
        return Err(TreeError::TooManyRelevant {
            n,
            cap: MAX_TREE_DIM,
        });
    }
    // Re-index hypotheses onto the relevant objects only.
    let local: Vec<u32> = catalog
        .paths
        .iter()
        .map(|p| {
            relevant
                .iter()
                .enumerate()
                .filter(|(_, &g)| p.hypothesis.contains(g))
                .fold(0u32, |acc, (k, _)| acc | 1 << k)
        })
        .collect();
    let map = (0..1u32 << n)
        .map(|config| {
            local
                .iter()
                .position(|&h| h & !config == 0)
                .map_or(Outcome::Infeasible, Outcome::Path)
        })
        .collect();
    let relevant_ids = relevant
        .iter()
        .map(|&g| catalog.uncertain_ids[g].clone())
        .collect();
    Ok(DecisionTree { relevant_ids, map })
}

/// `{T(s)}`: the set of catalog outcomes consistent with `belief`.
pub fn consistent_paths(tree: &DecisionTree, belief: &BeliefState) -> BTreeSet<Outcome> {
    tree.consistent(belief)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{BeliefState, Ternary};
    use crate::search::{CandidatePath, HypothesisSet, PathCost};

    fn catalog(hyps: &[u64], ids: &[&str]) -> CandidatePathCatalog {
        CandidatePathCatalog {
            paths: hyps
                .iter()
                .enumerate()
                .map(|(i, &h)| CandidatePath {
                    waypoints: vec![],
                    cost: PathCost::new(i as u32, 0),
                    hypothesis: HypothesisSet(h),
                })
                .collect(),
            uncertain_ids: ids.iter().map(|s| s.to_string()).collect(),
            resolution: 1.0,
            has_unconditional: hyps.contains(&0),
        }
    }

    #[test]
    fn one_object_tree() {
        let t = build_decision_tree(&catalog(&[0b1, 0], &["o1"])).unwrap();
        assert_eq!(t.relevant_ids, vec!["o1"]);
        assert_eq!(t.map, vec![Outcome::Path(1), Outcome::Path(0)]);
    }

    #[test]
    fn single_unconditional_is_constant() {
        let t = build_decision_tree(&catalog(&[0], &["a", "b"])).unwrap();
        assert_eq!(t.n(), 0);
        assert_eq!(t.map, vec![Outcome::Path(0)]);
    }

    #[test]
    fn empty_catalog_is_single_infeasible() {
        let t = build_decision_tree(&catalog(&[], &[])).unwrap();
        assert_eq!(t.n(), 0);
        assert_eq!(t.map, vec![Outcome::Infeasible]);
    }

    #[test]
    fn unsatisfied_hypotheses_are_infeasible() {
        let t = build_decision_tree(&catalog(&[0b01, 0b10], &["a", "b"])).unwrap();
        assert_eq!(t.outcome(0b00), Outcome::Infeasible);
        assert_eq!(t.outcome(0b01), Outcome::Path(0));
        assert_eq!(t.outcome(0b10), Outcome::Path(1));
        assert_eq!(t.outcome(0b11), Outcome::Path(0));
    }

    #[test]
    fn never_hypothesized_objects_are_pruned() {
        let t = build_decision_tree(&catalog(&[0b100, 0], &["a", "b", "c"])).unwrap();
        assert_eq!(t.relevant_ids, vec!["c"]);
    }

    #[test]
    fn consistency_sets() {
        let t = build_decision_tree(&catalog(&[0b1, 0], &["o1"])).unwrap();
        let unknown = BeliefState::unknown(1);
        assert_eq!(
            consistent_paths(&t, &unknown),
            [Outcome::Path(0), Outcome::Path(1)].into_iter().collect()
        );
        let known = BeliefState::from_ternary(&[Ternary::Passable]);
        assert_eq!(
            consistent_paths(&t, &known),
            [Outcome::Path(0)].into_iter().collect()
        );
        assert_eq!(t.determined(&known), Some(Outcome::Path(0)));
        assert_eq!(t.determined(&unknown), None);

        let flat = build_decision_tree(&catalog(&[0], &[])).unwrap();
        assert_eq!(
            consistent_paths(&flat, &BeliefState::unknown(0)),
            [Outcome::Path(0)].into_iter().collect()
        );
    }

    #[test]
    fn submask_enumeration_is_complete() {
        let subs: BTreeSet<u32> = submasks(0b1011).collect();
        assert_eq!(subs.len(), 8);
        assert!(subs.iter().all(|s| s & !0b1011 == 0));
    }

    #[test]
    fn outcome_json() {
        let t = DecisionTree::from_map(
            vec!["a".into()],
            vec![Outcome::Infeasible, Outcome::Path(0)],
        )
        .unwrap();
        let text = serde_json::to_string(&t).unwrap();
        assert_eq!(text, r#"{"relevant_ids":["a"],"map":["infeasible",0]}"#);
        let back: DecisionTree = serde_json::from_str(&text).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn from_map_validates() {
        assert_eq!(
            DecisionTree::from_map(vec!["a".into()], vec![Outcome::Path(0)]),
            Err(TreeError::MapLength {
                expected: 2,
                got: 1
            })
        );
    }
}
