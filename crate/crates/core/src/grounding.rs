//! Target grounding: from a natural-language description to one scene object.
//!
//! A [`GroundingProvider`] scores every object; those at or above `tau` form
//! the candidate set. While more than one candidate remains, tools are tried
//! in a configured order (attribute filter, distance and size comparison,
//! asking the human, random choice). Each tool either narrows the set or is
//! skipped, and every discrimination is written to the [`KnowledgeBase`].

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{Point, SceneObject, SemanticScene};

/// Default provider threshold.
pub const DEFAULT_TAU: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum GroundingError {
    #[error("no object matches \"{0}\"")]
    EmptyCandidateSet(String),
    #[error("tool not applicable: {0}")]
    InapplicableTool(String),
    #[error("cannot resolve \"{description}\" among {candidates:?}")]
    Unresolvable {
        description: String,
        candidates: Vec<String>,
    },
    #[error("answer \"{0}\" is not one of the candidates")]
    InvalidAnswer(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FactSource {
    Tool,
    Human,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fact {
    pub source: FactSource,
    pub key: String,
    pub value: String,
}

/// Append-only fact log; lookups return the most recent value for a key.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeBase {
    facts: Vec<Fact>,
}

impl KnowledgeBase {
    pub fn record(&mut self, source: FactSource, key: impl Into<String>, value: impl Into<String>) {
        self.facts.push(Fact {
            source,
            key: key.into(),
            value: value.into(),
        });
    }

    pub fn lookup(&self, key: &str) -> Option<&str> {
        self.facts
            .iter()
            .rev()
            .find(|f| f.key == key)
            .map(|f| f.value.as_str())
    }

    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }
}

/// KB key under which the resolved object for a description is stored.
pub fn target_key(description: &str) -> String {
    let words: Vec<String> = tokenize(description).collect();
    format!("target:{}", words.join(" "))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    /// (object id, score), descending by score.
    pub candidates: Vec<(String, f64)>,
    pub tau: f64,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.candidates.iter().map(|(id, _)| id.clone()).collect()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.candidates.iter().any(|(c, _)| c == id)
    }

    fn retain(&self, keep: impl Fn(&str) -> bool) -> CandidateSet {
        CandidateSet {
            candidates: self
                .candidates
                .iter()
                .filter(|(id, _)| keep(id))
                .cloned()
                .collect(),
            tau: self.tau,
        }
    }
}

/// Scores objects as the intended target of a description, in `[0, 1]`.
pub trait GroundingProvider {
    fn score(
        &self,
        description: &str,
        scene: &SemanticScene,
        kb: &KnowledgeBase,
    ) -> Vec<(String, f64)>;
}

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "of", "to", "from", "with", "in", "on", "at", "and", "it", "its", "that",
    "this", "which", "one", "get", "pick", "up", "take", "go", "deliver", "bring", "some",
];

const NEAR_CUES: &[&str] = &["nearest", "closest", "near", "close"];
const FAR_CUES: &[&str] = &["farthest", "furthest", "far"];
const LARGE_CUES: &[&str] = &["largest", "biggest", "larger", "bigger", "large", "big"];
const SMALL_CUES: &[&str] = &["smallest", "smaller", "small", "tiny"];

fn is_cue(word: &str) -> bool {
    [NEAR_CUES, FAR_CUES, LARGE_CUES, SMALL_CUES]
        .iter()
        .any(|cues| cues.contains(&word))
}

fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .filter(|w| !STOPWORDS.contains(&w.as_str()))
}

fn content_words(description: &str) -> Vec<String> {
    tokenize(description).filter(|w| !is_cue(w)).collect()
}

fn object_words(o: &SceneObject) -> BTreeSet<String> {
    tokenize(&o.name)
        .chain(
            o.attributes
                .values()
                .flat_map(|v| tokenize(v).collect::<Vec<_>>()),
        )
        .collect()
}

/// Attribute constraints implied by a description: every word that is some
/// object's value for some attribute key.
pub fn attribute_constraints(description: &str, scene: &SemanticScene) -> Vec<(String, String)> {
    let mut vocab: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for o in &scene.objects {
        for (k, v) in &o.attributes {
            vocab.entry(v.to_lowercase()).or_default().insert(k.clone());
        }
    }
    let mut out = Vec::new();
    for w in content_words(description) {
        if let Some(keys) = vocab.get(&w) {
            for k in keys {
                let pair = (k.clone(), w.clone());
                if !out.contains(&pair) {
                    out.push(pair);
                }
            }
        }
    }
    out
}

fn satisfies(o: &SceneObject, constraints: &[(String, String)]) -> bool {
    constraints.iter().all(|(k, v)| {
        o.attributes
            .get(k)
            .is_some_and(|have| have.to_lowercase() == *v)
    })
}

/// Deterministic keyword matcher.
///
/// Score is the fraction of the description's content words found among the
/// object's name and attribute values; an object whose attribute contradicts
/// a value named in the description scores 0. A KB entry for the description
/// overrides everything.
#[derive(Debug, Clone, Copy, Default)]
pub struct AttributeMatcher;

impl GroundingProvider for AttributeMatcher {
    fn score(
        &self,
        description: &str,
        scene: &SemanticScene,
        kb: &KnowledgeBase,
    ) -> Vec<(String, f64)> {
        if let Some(known) = kb.lookup(&target_key(description)) {
            return scene
                .objects
                .iter()
                .map(|o| (o.id.clone(), if o.id == known { 1.0 } else { 0.0 }))
                .collect();
        }
        let words = content_words(description);
        let constraints = attribute_constraints(description, scene);
        scene
            .objects
            .iter()
            .map(|o| {
                let score = if words.is_empty() || !satisfies(o, &constraints) {
                    0.0
                } else {
                    let have = object_words(o);
                    words.iter().filter(|w| have.contains(*w)).count() as f64 / words.len() as f64
                };
                (o.id.clone(), score)
            })
            .collect()
    }
}

/// Objects scoring at least `tau`, best first (scene order on ties).
pub fn score_candidates(
    description: &str,
    scene: &SemanticScene,
    kb: &KnowledgeBase,
    provider: &dyn GroundingProvider,
    tau: f64,
) -> Result<CandidateSet, GroundingError> {
    let mut candidates: Vec<(String, f64)> = provider
        .score(description, scene, kb)
        .into_iter()
        .filter(|(_, s)| *s >= tau && *s > 0.0)
        .collect();
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1));
    if candidates.is_empty() {
        return Err(GroundingError::EmptyCandidateSet(description.to_string()));
    }
    Ok(CandidateSet { candidates, tau })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extremum {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolKind {
    AttributeFilter,
    CompareDistance,
    CompareSize,
    AskHuman,
    RandomSelect,
}

/// Default order; `random_select` is left out.
pub const DEFAULT_TOOL_ORDER: [ToolKind; 4] = [
    ToolKind::AttributeFilter,
    ToolKind::CompareDistance,
    ToolKind::CompareSize,
    ToolKind::AskHuman,
];

#[derive(Debug, Clone, PartialEq)]
pub enum ToolAction {
    AttributeFilter {
        constraints: Vec<(String, String)>,
    },
    CompareDistance {
        reference: Option<Point>,
        prefer: Extremum,
    },
    CompareSize {
        prefer: Extremum,
    },
    /// The human's answer to the question stored under `key`.
    AskHuman {
        key: String,
        answer: String,
    },
    RandomSelect {
        seed: u64,
    },
}

fn extreme_by(
    set: &CandidateSet,
    scene: &SemanticScene,
    prefer: Extremum,
    measure: impl Fn(&SceneObject) -> f64,
) -> CandidateSet {
    let values: Vec<(String, f64)> = set
        .candidates
        .iter()
        .filter_map(|(id, _)| scene.object(id).map(|o| (id.clone(), measure(o))))
        .collect();
    let best = values.iter().map(|(_, v)| *v).fold(
        match prefer {
            Extremum::Min => f64::INFINITY,
            Extremum::Max => f64::NEG_INFINITY,
        },
        |acc, v| match prefer {
            Extremum::Min => acc.min(v),
            Extremum::Max => acc.max(v),
        },
    );
    let keep: BTreeSet<String> = values
        .into_iter()
        .filter(|(_, v)| (v - best).abs() <= 1e-9)
        .map(|(id, _)| id)
        .collect();
    set.retain(|id| keep.contains(id))
}

fn describe(set: &CandidateSet) -> String {
    set.ids().join(",")
}

/// Applies one tool. The returned set is never larger than the input; the KB
/// gains a fact whenever the tool discriminated.
pub fn apply_tool(
    action: &ToolAction,
    set: &CandidateSet,
    scene: &SemanticScene,
    kb: &KnowledgeBase,
) -> Result<(CandidateSet, KnowledgeBase), GroundingError> {
    let mut kb = kb.clone();
    let (next, fact) = match action {
        ToolAction::AttributeFilter { constraints } => {
            if constraints.is_empty() {
                return Err(GroundingError::InapplicableTool(
                    "attribute_filter needs at least one attribute".into(),
                ));
            }
            let filtered =
                set.retain(|id| scene.object(id).is_some_and(|o| satisfies(o, constraints)));
            let key = constraints
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join("&");
            (filtered, format!("attribute:{key}"))
        }
        ToolAction::CompareDistance { reference, prefer } => {
            let Some(r) = reference else {
                return Err(GroundingError::InapplicableTool(
                    "compare_distance needs a reference point".into(),
                ));
            };
            let r = *r;
            let filtered = extreme_by(set, scene, *prefer, |o| o.aabb.center().distance(r));
            (filtered, format!("distance:{prefer:?}@{r}"))
        }
        ToolAction::CompareSize { prefer } => {
            let filtered = extreme_by(set, scene, *prefer, |o| o.aabb.area());
            (filtered, format!("size:{prefer:?}"))
        }
        ToolAction::AskHuman { key, answer } => {
            if !set.contains(answer) {
                return Err(GroundingError::InvalidAnswer(answer.clone()));
            }
            kb.record(FactSource::Human, key.clone(), answer.clone());
            return Ok((set.retain(|id| id == answer), kb));
        }
        ToolAction::RandomSelect { seed } => {
            if set.is_empty() {
                return Ok((set.clone(), kb));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let pick = set.candidates[rng.random_range(0..set.len())].0.clone();
            (set.retain(|id| id == pick), "random".to_string())
        }
    };
    // A filter that would empty the set carries no usable information.
    if next.is_empty() || next.len() == set.len() {
        return Ok((set.clone(), kb));
    }
    kb.record(FactSource::Tool, fact, describe(&next));
    Ok((next, kb))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOptions {
    pub tool_order: Vec<ToolKind>,
    /// Point distances are measured from (normally the robot).
    pub reference: Option<Point>,
    pub random_seed: u64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions {
            tool_order: DEFAULT_TOOL_ORDER.to_vec(),
            reference: None,
            random_seed: 0,
        }
    }
}

fn cue(description: &str, cues: &[&str]) -> bool {
    tokenize(description).any(|w| cues.contains(&w.as_str()))
}

/// Builds the concrete tool action for `kind`, or `None` if the description
/// gives it nothing to work with.
pub fn tool_for(
    kind: ToolKind,
    description: &str,
    scene: &SemanticScene,
    options: &RefineOptions,
) -> Option<ToolAction> {
    match kind {
        ToolKind::AttributeFilter => {
            let constraints = attribute_constraints(description, scene);
            (!constraints.is_empty()).then_some(ToolAction::AttributeFilter { constraints })
        }
        ToolKind::CompareDistance => {
            let prefer = if cue(description, NEAR_CUES) {
                Extremum::Min
            } else if cue(description, FAR_CUES) {
                Extremum::Max
            } else {
                return None;
            };
            Some(ToolAction::CompareDistance {
                reference: options.reference,
                prefer,
            })
        }
        ToolKind::CompareSize => {
            let prefer = if cue(description, LARGE_CUES) {
                Extremum::Max
            } else if cue(description, SMALL_CUES) {
                Extremum::Min
            } else {
                return None;
            };
            Some(ToolAction::CompareSize { prefer })
        }
        ToolKind::RandomSelect => Some(ToolAction::RandomSelect {
            seed: options.random_seed,
        }),
        ToolKind::AskHuman => None,
    }
}

/// Question text for a clarification.
pub fn question_for(description: &str, candidates: &[String]) -> String {
    format!(
        "Which object do you mean by \"{}\"? Candidates: {}",
        description.trim(),
        candidates.join(", ")
    )
}

/// Where a resumable refinement stands.
#[derive(Debug, Clone, PartialEq)]
pub enum RefineStep {
    Resolved(String),
    NeedHuman {
        key: String,
        question: String,
        candidates: Vec<String>,
    },
}

/// Resumable refinement: runs deterministic tools eagerly and pauses when the
/// human must be asked.
#[derive(Debug, Clone)]
pub struct Refiner {
    pub description: String,
    pub set: CandidateSet,
    pub kb: KnowledgeBase,
    pub queries: usize,
    options: RefineOptions,
    next_tool: usize,
    awaiting: Option<String>,
    /// Set sizes after each applied tool, starting with the input size.
    pub history: Vec<usize>,
}

impl Refiner {
    pub fn new(
        description: &str,
        set: CandidateSet,
        kb: KnowledgeBase,
        options: RefineOptions,
    ) -> Self {
        let history = vec![set.len()];
        Refiner {
            description: description.to_string(),
            set,
            kb,
            queries: 0,
            options,
            next_tool: 0,
            awaiting: None,
            history,
        }
    }

    pub fn advance(&mut self, scene: &SemanticScene) -> Result<RefineStep, GroundingError> {
        if let Some(key) = &self.awaiting {
            return Ok(RefineStep::NeedHuman {
                key: key.clone(),
                question: question_for(&self.description, &self.set.ids()),
                candidates: self.set.ids(),
            });
        }
        while self.set.len() > 1 {
            let Some(&kind) = self.options.tool_order.get(self.next_tool) else {
                return Err(GroundingError::Unresolvable {
                    description: self.description.clone(),
                    candidates: self.set.ids(),
                });
            };
            self.next_tool += 1;
            if kind == ToolKind::AskHuman {
                let key = target_key(&self.description);
                if let Some(known) = self.kb.lookup(&key).map(str::to_string) {
                    if self.set.contains(&known) {
                        self.set = self.set.retain(|id| id == known);
                        self.history.push(self.set.len());
                        continue;
                    }
                }
                self.awaiting = Some(key.clone());
                // Retry this slot once the answer arrives.
                self.next_tool -= 1;
                return Ok(RefineStep::NeedHuman {
                    key,
                    question: question_for(&self.description, &self.set.ids()),
                    candidates: self.set.ids(),
                });
            }
            let Some(action) = tool_for(kind, &self.description, scene, &self.options) else {
                continue;
            };
            match apply_tool(&action, &self.set, scene, &self.kb) {
                Ok((set, kb)) => {
                    self.set = set;
                    self.kb = kb;
                    self.history.push(self.set.len());
                }
                Err(GroundingError::InapplicableTool(_)) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(RefineStep::Resolved(self.set.candidates[0].0.clone()))
    }

    /// Delivers the human's answer to the pending question.
    pub fn answer(&mut self, scene: &SemanticScene, answer: &str) -> Result<(), GroundingError> {
        let Some(key) = self.awaiting.take() else {
            return Err(GroundingError::InvalidAnswer(answer.to_string()));
        };
        let action = ToolAction::AskHuman {
            key: key.clone(),
            answer: answer.to_string(),
        };
        match apply_tool(&action, &self.set, scene, &self.kb) {
            Ok((set, kb)) => {
                self.set = set;
                self.kb = kb;
                self.queries += 1;
                self.history.push(self.set.len());
                self.next_tool += 1;
                Ok(())
            }
            Err(e) => {
                self.awaiting = Some(key);
                Err(e)
            }
        }
    }

    /// Gives up on the human and skips the ask slot.
    pub fn skip_human(&mut self) {
        if self.awaiting.take().is_some() {
            self.next_tool += 1;
        }
    }
}

/// Channel to a human who can name the intended object.
pub trait HumanChannel {
    /// `None` when no answer can be obtained.
    fn ask_target(
        &mut self,
        question: &str,
        description: &str,
        candidates: &[String],
    ) -> Option<String>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub object: String,
    pub kb: KnowledgeBase,
    pub queries: usize,
}

/// Narrows `set` to a unique object.
pub fn refine_target(
    description: &str,
    set: CandidateSet,
    scene: &SemanticScene,
    kb: &KnowledgeBase,
    mut human: Option<&mut dyn HumanChannel>,
    options: &RefineOptions,
) -> Result<Refinement, GroundingError> {
    let mut refiner = Refiner::new(description, set, kb.clone(), options.clone());
    loop {
        match refiner.advance(scene)? {
            RefineStep::Resolved(object) => {
                return Ok(Refinement {
                    object,
                    kb: refiner.kb,
                    queries: refiner.queries,
                })
            }
            RefineStep::NeedHuman {
                question,
                candidates,
                ..
            } => {
                let reply = human
                    .as_deref_mut()
                    .and_then(|h| h.ask_target(&question, description, &candidates));
                match reply {
                    Some(answer) => refiner.answer(scene, &answer)?,
                    None => refiner.skip_human(),
                }
            }
        }
    }
}
