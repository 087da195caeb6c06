//! Mode-1 episodes: ground the instruction, then plan the whole route under
//! traversability uncertainty, asking the human when the strategy allows.
//! One query policy covers every leg, so an answer is never paid for twice.
//!
//! [`Mode1Run`] is a resumable state machine so the same code serves offline
//! episodes (answers from the scenario) and live sessions (answers from a
//! person).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::grounding::{
    score_candidates, AttributeMatcher, GroundingError, KnowledgeBase, RefineOptions, RefineStep,
    Refiner, ToolKind, DEFAULT_TAU, DEFAULT_TOOL_ORDER,
};
use crate::policy::{
    next_query, solve_policy_capped, BeliefState, CostParams, NextStep, QueryPolicy, QueryRecord,
    DEFAULT_MAX_POLICY_DIM,
};
use crate::search::{search, swept_mask, CandidatePathCatalog, PlannerConfig, SearchError};
use crate::tree::{build_decision_tree, DecisionTree, Outcome, TreeError, MAX_TREE_DIM};
use crate::world::{
    ActionKind, Cell, Occupancy, Overrides, Point, Scenario, SemanticScene, Traversability,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Follow the solved query policy.
    Optimal,
    /// Verify every uncertain object in one query before planning.
    Exhaustive,
    /// Never ask; treat uncertain objects as blocked.
    None,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Optimal, Strategy::Exhaustive, Strategy::None];
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Optimal => "optimal",
            Strategy::Exhaustive => "exhaustive",
            Strategy::None => "none",
        })
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "optimal" => Ok(Strategy::Optimal),
            "exhaustive" => Ok(Strategy::Exhaustive),
            "none" => Ok(Strategy::None),
            other => Err(format!("unknown strategy \"{other}\"")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mode1Options {
    pub costs: CostParams,
    pub planner: PlannerConfig,
    pub tau: f64,
    pub tool_order: Vec<ToolKind>,
    pub max_policy_dim: usize,
}

impl Default for Mode1Options {
    fn default() -> Self {
        Mode1Options {
            costs: CostParams::default(),
            planner: PlannerConfig::default(),
            tau: DEFAULT_TAU,
            tool_order: DEFAULT_TOOL_ORDER.to_vec(),
            max_policy_dim: DEFAULT_MAX_POLICY_DIM,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegRecord {
    pub from: Point,
    pub to: Point,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    /// Objects left out of the obstacle picture on this leg.
    pub ignored: Vec<String>,
    /// Size of the candidate catalog.
    pub candidates: usize,
    pub relevant: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_index: Option<usize>,
    pub cells: Vec<Cell>,
    pub length_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Mode1Outcome {
    Planned,
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode1Result {
    pub strategy: Strategy,
    pub outcome: Mode1Outcome,
    /// Description -> grounded object id.
    pub grounded: BTreeMap<String, String>,
    pub legs: Vec<LegRecord>,
    pub waypoints: Vec<Point>,
    pub path_length_m: f64,
    pub target_queries: usize,
    pub query_events: usize,
    pub objects_verified: usize,
    pub query_cost: f64,
    pub transcript: Vec<QueryRecord>,
}

/// What the run needs next.
#[derive(Debug, Clone, PartialEq)]
pub enum Mode1Event {
    QueryTarget {
        description: String,
        question: String,
        candidates: Vec<String>,
    },
    QueryTraversability {
        objects: Vec<String>,
    },
    Finished(Box<Mode1Result>),
}

#[derive(Debug, Clone)]
struct LegPlan {
    from: Point,
    to: Point,
    target: Option<String>,
    ignored: BTreeSet<String>,
}

struct ActiveRoute {
    catalogs: Vec<CandidatePathCatalog>,
    /// Per-leg relevant objects.
    relevant: Vec<Vec<String>>,
    /// Joint outcome index -> path index per leg.
    routes: Vec<Vec<usize>>,
    policy: QueryPolicy,
    belief: BeliefState,
}

enum Phase {
    Grounding {
        step: usize,
        refiner: Option<Refiner>,
    },
    Route {
        active: Option<ActiveRoute>,
    },
    Done(Box<Mode1Result>),
}

enum Pending {
    Target,
    Traversability(Vec<String>),
}

pub struct Mode1Run {
    scene: SemanticScene,
    steps: Vec<(ActionKind, Option<String>)>,
    strategy: Strategy,
    options: Mode1Options,
    kb: KnowledgeBase,
    step_objects: Vec<Option<String>>,
    grounded: BTreeMap<String, String>,
    legs_plan: Vec<LegPlan>,
    known: BTreeMap<String, bool>,
    legs: Vec<LegRecord>,
    transcript: Vec<QueryRecord>,
    target_queries: usize,
    phase: Phase,
    pending: Option<Pending>,
    policies: Vec<QueryPolicy>,
}

impl Mode1Run {
    pub fn new(
        scenario: &Scenario,
        strategy: Strategy,
        options: Mode1Options,
    ) -> Result<Self, SimError> {
        scenario.scene.validate()?;
        let steps = match &scenario.instruction {
            Some(instr) => instr
                .steps
                .iter()
                .map(|s| (s.action, s.target.clone()))
                .collect(),
            None => vec![(ActionKind::Navigate, None)],
        };
        Ok(Mode1Run {
            scene: scenario.scene.clone(),
            steps,
            strategy,
            options,
            kb: KnowledgeBase::default(),
            step_objects: Vec::new(),
            grounded: BTreeMap::new(),
            legs_plan: Vec::new(),
            known: BTreeMap::new(),
            legs: Vec::new(),
            transcript: Vec::new(),
            target_queries: 0,
            phase: Phase::Grounding {
                step: 0,
                refiner: None,
            },
            pending: None,
            policies: Vec::new(),
        })
    }

    pub fn scene(&self) -> &SemanticScene {
        &self.scene
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    /// Traversability answers gathered so far.
    pub fn known(&self) -> &BTreeMap<String, bool> {
        &self.known
    }

    /// Query policies solved so far (one per episode that reached planning).
    pub fn policies(&self) -> &[QueryPolicy] {
        &self.policies
    }

    pub fn is_waiting(&self) -> bool {
        self.pending.is_some()
    }

    /// Runs until the human must answer something or the episode is over.
    pub fn advance(&mut self) -> Result<Mode1Event, SimError> {
        loop {
            if let Some(event) = self.pending_event() {
                return Ok(event);
            }
            match &mut self.phase {
                Phase::Done(result) => return Ok(Mode1Event::Finished(result.clone())),
                Phase::Grounding { .. } => self.ground_step()?,
                Phase::Route { .. } => self.plan_step()?,
            }
        }
    }

    fn pending_event(&self) -> Option<Mode1Event> {
        match self.pending.as_ref()? {
            Pending::Traversability(objects) => Some(Mode1Event::QueryTraversability {
                objects: objects.clone(),
            }),
            Pending::Target => {
                let Phase::Grounding {
                    refiner: Some(r), ..
                } = &self.phase
                else {
                    return None;
                };
                Some(Mode1Event::QueryTarget {
                    description: r.description.clone(),
                    question: crate::grounding::question_for(&r.description, &r.set.ids()),
                    candidates: r.set.ids(),
                })
            }
        }
    }

    /// Answers the pending target question.
    pub fn answer_target(&mut self, object: &str) -> Result<(), SimError> {
        if !matches!(self.pending, Some(Pending::Target)) {
            return Err(SimError::UnexpectedInput(
                "no target question is pending".into(),
            ));
        }
        let Phase::Grounding {
            refiner: Some(r), ..
        } = &mut self.phase
        else {
            return Err(SimError::UnexpectedInput(
                "no target question is pending".into(),
            ));
        };
        r.answer(&self.scene, object)?;
        self.target_queries += 1;
        self.pending = None;
        Ok(())
    }

    /// Answers the pending traversability query; must cover exactly the asked objects.
    pub fn answer_traversability(
        &mut self,
        answers: &BTreeMap<String, bool>,
    ) -> Result<(), SimError> {
        let Some(Pending::Traversability(objects)) = &self.pending else {
            return Err(SimError::UnexpectedInput(
                "no traversability query is pending".into(),
            ));
        };
        if answers.len() != objects.len() || objects.iter().any(|o| !answers.contains_key(o)) {
            return Err(SimError::UnexpectedInput(format!(
                "answers must cover exactly {objects:?}"
            )));
        }
        if let Phase::Route {
            active: Some(active),
        } = &mut self.phase
        {
            active.belief = active
                .belief
                .apply_answers(&active.policy.tree.relevant_ids, answers)?;
        }
        self.transcript.push(QueryRecord {
            objects: objects.clone(),
            answers: answers.clone(),
        });
        self.known
            .extend(answers.iter().map(|(k, v)| (k.clone(), *v)));
        self.pending = None;
        Ok(())
    }

    fn refine_options(&self) -> RefineOptions {
        let tool_order = self
            .options
            .tool_order
            .iter()
            .copied()
            .filter(|k| self.strategy != Strategy::None || *k != ToolKind::AskHuman)
            .collect();
        RefineOptions {
            tool_order,
            reference: Some(self.scene.start),
            random_seed: 0,
        }
    }

    fn ground_step(&mut self) -> Result<(), SimError> {
        let options = self.refine_options();
        let Phase::Grounding { step, refiner } = &mut self.phase else {
            unreachable!("called in grounding phase");
        };
        if *step == self.steps.len() {
            self.legs_plan = self.plan_legs();
            self.phase = Phase::Route { active: None };
            return Ok(());
        }
        let (action, target) = self.steps[*step].clone();
        let Some(description) = target.filter(|_| action != ActionKind::Return) else {
            self.step_objects.push(None);
            *step += 1;
            return Ok(());
        };
        if refiner.is_none() {
            let set = match score_candidates(
                &description,
                &self.scene,
                &self.kb,
                &AttributeMatcher,
                self.options.tau,
            ) {
                Ok(set) => set,
                Err(GroundingError::EmptyCandidateSet(d)) => {
                    self.finish(Mode1Outcome::Failed {
                        reason: format!("nothing in the scene matches \"{d}\""),
                    });
                    return Ok(());
                }
                Err(e) => return Err(e.into()),
            };
            *refiner = Some(Refiner::new(&description, set, self.kb.clone(), options));
        }
        let r = refiner.as_mut().expect("refiner was just set");
        let object = match r.advance(&self.scene) {
            Ok(RefineStep::Resolved(id)) => id,
            Ok(RefineStep::NeedHuman { .. }) => {
                self.pending = Some(Pending::Target);
                return Ok(());
            }
            Err(GroundingError::Unresolvable { candidates, .. }) => {
                // Without a human, fall back to the candidate closest to the start.
                let start = self.scene.start;
                candidates
                    .iter()
                    .filter_map(|id| self.scene.object(id))
                    .min_by(|a, b| {
                        a.aabb
                            .center()
                            .distance(start)
                            .total_cmp(&b.aabb.center().distance(start))
                    })
                    .map(|o| o.id.clone())
                    .expect("candidate sets are never empty")
            }
            Err(e) => return Err(e.into()),
        };
        self.kb = r.kb.clone();
        self.grounded.insert(description, object.clone());
        self.step_objects.push(Some(object));
        *step += 1;
        *refiner = None;
        Ok(())
    }

    fn plan_legs(&self) -> Vec<LegPlan> {
        let mut legs = Vec::new();
        let mut here = self.scene.start;
        let mut here_object: Option<String> = None;
        for ((action, _), object) in self.steps.iter().zip(&self.step_objects) {
            let to = match (action, object) {
                (ActionKind::Return, _) => self.scene.start,
                (_, Some(id)) => self
                    .scene
                    .object(id)
                    .expect("grounded ids exist")
                    .aabb
                    .center(),
                (_, None) => self.scene.goal,
            };
            let same_cell =
                self.scene.grid.world_to_cell(here).ok() == self.scene.grid.world_to_cell(to).ok();
            if !same_cell {
                let ignored = here_object.iter().chain(object.iter()).cloned().collect();
                legs.push(LegPlan {
                    from: here,
                    to,
                    target: object.clone(),
                    ignored,
                });
            }
            here = to;
            here_object = if *action == ActionKind::Return {
                None
            } else {
                object.clone()
            };
        }
        legs
    }

    fn unknown_uncertain(&self) -> Vec<String> {
        self.scene
            .objects
            .iter()
            .filter(|o| matches!(o.traversability, Traversability::Uncertain(_)))
            .filter(|o| !self.known.contains_key(&o.id))
            .map(|o| o.id.clone())
            .collect()
    }

    fn plan_step(&mut self) -> Result<(), SimError> {
        let Phase::Route { active } = &self.phase else {
            unreachable!("called in route phase");
        };
        if let Some(act) = active {
            return match next_query(&act.policy, &act.belief)? {
                NextStep::Query { objects, .. } => {
                    self.pending = Some(Pending::Traversability(objects));
                    Ok(())
                }
                NextStep::Done(i) => {
                    let route = act.routes[i].clone();
                    let catalogs = act.catalogs.clone();
                    let relevant = act.relevant.clone();
                    for (k, plan) in self.legs_plan.clone().iter().enumerate() {
                        self.record_leg(plan, &catalogs[k], route[k], relevant[k].clone());
                    }
                    self.finish(Mode1Outcome::Planned);
                    Ok(())
                }
                NextStep::Infeasible => {
                    self.finish(Mode1Outcome::Failed {
                        reason: "no route under the answered configuration".into(),
                    });
                    Ok(())
                }
            };
        }

        if self.strategy == Strategy::Exhaustive {
            let unknown = self.unknown_uncertain();
            if !unknown.is_empty() {
                self.pending = Some(Pending::Traversability(unknown));
                return Ok(());
            }
        }
        let mut known = self.known.clone();
        if self.strategy == Strategy::None {
            for id in self.unknown_uncertain() {
                known.insert(id, false);
            }
        }

        let mut catalogs = Vec::new();
        let mut trees = Vec::new();
        for plan in &self.legs_plan {
            let overrides = Overrides {
                known: known.clone(),
                ignored: plan.ignored.clone(),
            };
            let occ = Occupancy::build(&self.scene, &overrides)?;
            let start = self.scene.grid.world_to_cell(plan.from)?;
            let goal = self.scene.grid.world_to_cell(plan.to)?;
            let catalog = match search(&occ, start, goal, self.options.planner) {
                Ok(c) => c,
                Err(SearchError::NoPathUnderAnyHypothesis) => {
                    self.finish(Mode1Outcome::Failed {
                        reason: format!("no path from {} to {}", plan.from, plan.to),
                    });
                    return Ok(());
                }
                Err(SearchError::StartBlocked(c)) => {
                    self.finish(Mode1Outcome::Failed {
                        reason: format!("leg start cell {c:?} is blocked"),
                    });
                    return Ok(());
                }
                Err(SearchError::World(e)) => return Err(e.into()),
            };
            trees.push(build_decision_tree(&catalog)?);
            catalogs.push(catalog);
        }

        let mut ids: Vec<String> = Vec::new();
        for tree in &trees {
            for id in &tree.relevant_ids {
                if !ids.contains(id) {
                    ids.push(id.clone());
                }
            }
        }
        if ids.len() > MAX_TREE_DIM {
            return Err(TreeError::TooManyRelevant {
                n: ids.len(),
                cap: MAX_TREE_DIM,
            }
            .into());
        }
        let mut routes: Vec<Vec<usize>> = Vec::new();
        let mut map = Vec::with_capacity(1 << ids.len());
        for config in 0..1u32 << ids.len() {
            let truth = |id: &str| {
                ids.iter()
                    .position(|u| u == id)
                    .map(|k| config >> k & 1 == 1)
            };
            let mut route = Vec::with_capacity(trees.len());
            for tree in &trees {
                let c = tree.config_of(truth).expect("leg objects are in the union");
                match tree.outcome(c) {
                    Outcome::Path(i) => route.push(i),
                    Outcome::Infeasible => break,
                }
            }
            map.push(if route.len() < trees.len() {
                Outcome::Infeasible
            } else if let Some(i) = routes.iter().position(|r| *r == route) {
                Outcome::Path(i)
            } else {
                routes.push(route);
                Outcome::Path(routes.len() - 1)
            });
        }
        let priors: Vec<f64> = ids
            .iter()
            .map(|id| match self.scene.object(id).map(|o| o.traversability) {
                Some(Traversability::Uncertain(p)) => p,
                _ => unreachable!("relevant objects are uncertain"),
            })
            .collect();
        let tree = DecisionTree::from_map(ids, map)?;
        let policy = solve_policy_capped(
            &tree,
            &priors,
            self.options.costs,
            self.options.max_policy_dim,
        )?;
        let belief = policy.initial_belief();
        self.policies.push(policy.clone());
        self.phase = Phase::Route {
            active: Some(ActiveRoute {
                catalogs,
                relevant: trees.into_iter().map(|t| t.relevant_ids).collect(),
                routes,
                policy,
                belief,
            }),
        };
        Ok(())
    }

    fn record_leg(
        &mut self,
        plan: &LegPlan,
        catalog: &CandidatePathCatalog,
        index: usize,
        relevant: Vec<String>,
    ) {
        let path = &catalog.paths[index];
        self.legs.push(LegRecord {
            from: plan.from,
            to: plan.to,
            target: plan.target.clone(),
            ignored: plan.ignored.iter().cloned().collect(),
            candidates: catalog.paths.len(),
            relevant,
            path_index: Some(index),
            cells: path.waypoints.clone(),
            length_m: catalog.cost_m(index),
        });
    }

    fn finish(&mut self, outcome: Mode1Outcome) {
        let mut waypoints: Vec<Point> = Vec::new();
        for leg in &self.legs {
            for c in &leg.cells {
                let p = self.scene.grid.cell_to_world(*c);
                if waypoints.last() != Some(&p) {
                    waypoints.push(p);
                }
            }
        }
        let query_events = self.transcript.len();
        let objects_verified = self.transcript.iter().map(|q| q.objects.len()).sum();
        let result = Mode1Result {
            strategy: self.strategy,
            outcome,
            grounded: self.grounded.clone(),
            legs: self.legs.clone(),
            path_length_m: self.legs.iter().map(|l| l.length_m).sum(),
            waypoints,
            target_queries: self.target_queries,
            query_events,
            objects_verified,
            query_cost: self.options.costs.lambda1 * query_events as f64
                + self.options.costs.lambda2 * objects_verified as f64,
            transcript: self.transcript.clone(),
        };
        self.pending = None;
        self.phase = Phase::Done(Box::new(result));
    }
}

/// Re-checks every leg against the true traversability, independently of
/// the planner's own bookkeeping.
pub fn check_path(
    scene: &SemanticScene,
    legs: &[LegRecord],
    truth: &BTreeMap<String, bool>,
) -> Result<(), String> {
    for (i, leg) in legs.iter().enumerate() {
        let overrides = Overrides {
            known: truth.clone(),
            ignored: leg.ignored.iter().cloned().collect(),
        };
        let occ = Occupancy::build(scene, &overrides).map_err(|e| e.to_string())?;
        if let Some(u) = occ.uncertain.first() {
            return Err(format!("no ground truth for \"{}\"", u.id));
        }
        let ends = (
            scene.grid.world_to_cell(leg.from).ok(),
            scene.grid.world_to_cell(leg.to).ok(),
        );
        if (leg.cells.first().copied(), leg.cells.last().copied()) != ends {
            return Err(format!("leg {i} does not connect its endpoints"));
        }
        if swept_mask(&occ, &leg.cells).is_none() {
            return Err(format!("leg {i} crosses a blocked cell"));
        }
    }
    Ok(())
}

/// Result of a full offline mode-1 episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode1Report {
    pub result: Mode1Result,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Runs one episode with answers drawn from the scenario's answer key and
/// ground truth, then judges it.
pub fn run_mode1_episode(
    scenario: &Scenario,
    truth: &BTreeMap<String, bool>,
    strategy: Strategy,
    options: &Mode1Options,
) -> Result<Mode1Report, SimError> {
    let mut run = Mode1Run::new(scenario, strategy, options.clone())?;
    drive_mode1(&mut run, scenario, truth)
}

/// Answers `run`'s questions from the scenario's answer key and `truth`
/// until it finishes, then judges the result.
pub fn drive_mode1(
    run: &mut Mode1Run,
    scenario: &Scenario,
    truth: &BTreeMap<String, bool>,
) -> Result<Mode1Report, SimError> {
    for id in scenario.scene.uncertain_ids() {
        if !truth.contains_key(&id) {
            return Err(SimError::MissingGroundTruth(id));
        }
    }
    let key = scenario.answer_key.clone().unwrap_or_default();
    let result = loop {
        match run.advance()? {
            Mode1Event::QueryTarget { description, .. } => {
                let answer = key.targets.get(&description).ok_or_else(|| {
                    SimError::AnswerKeyMismatch(format!("no answer for \"{description}\""))
                })?;
                run.answer_target(answer)
                    .map_err(|e| SimError::AnswerKeyMismatch(e.to_string()))?;
            }
            Mode1Event::QueryTraversability { objects } => {
                let answers = objects.iter().map(|o| (o.clone(), truth[o])).collect();
                run.answer_traversability(&answers)?;
            }
            Mode1Event::Finished(result) => break *result,
        }
    };
    let failure = match &result.outcome {
        Mode1Outcome::Failed { reason } => Some(reason.clone()),
        Mode1Outcome::Planned => {
            let wrong = result
                .grounded
                .iter()
                .find(|(d, id)| key.targets.get(*d).is_some_and(|want| want != *id));
            match wrong {
                Some((d, id)) => Some(format!(
                    "\"{d}\" grounded to {id}, expected {}",
                    key.targets[d]
                )),
                None => check_path(&scenario.scene, &result.legs, truth).err(),
            }
        }
    };
    Ok(Mode1Report {
        success: failure.is_none(),
        failure,
        result,
    })
}
