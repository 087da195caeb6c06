//! Robot task selection around the human's inferred target.
//!
//! Rules, in priority order: stay on a target the robot is already close to;
//! hold the current target while the intent estimate is unconfident; join the
//! human at a cooperative task; otherwise take a different independent task.
//! A robot waiting at a cooperative task gives up after a timeout.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::intent::IntentBelief;
use crate::world::{Point, Task, TaskKind};

#[derive(Debug, Error, PartialEq)]
pub enum CoordinationError {
    #[error("no remaining tasks")]
    EmptyTaskSet,
    #[error("unknown task \"{0}\"")]
    UnknownTask(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoordinationParams {
    /// Minimum confidence before the robot reacts to the intent estimate.
    pub tau_intent: f64,
    /// Commitment radius, m.
    pub r_commit: f64,
    /// Longest wait at a cooperative task, s.
    pub wait_timeout: f64,
}

impl Default for CoordinationParams {
    fn default() -> Self {
        CoordinationParams {
            tau_intent: 0.5,
            r_commit: 1.5,
            wait_timeout: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionMode {
    PursueCooperative,
    ComplementIndependent,
    /// The human's independent task when no other independent task is left.
    PursueIndependent,
    KeepCurrent,
    NearestFallback,
    WaitAtTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotDecision {
    pub target: String,
    pub mode: DecisionMode,
    /// Cooperative task whose wait timed out on this tick.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub released: Option<String>,
}

impl RobotDecision {
    fn new(target: &str, mode: DecisionMode) -> Self {
        RobotDecision {
            target: target.to_string(),
            mode,
            released: None,
        }
    }
}

/// A cooperative task the robot stopped waiting at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Release {
    pub task: String,
    /// Completed-task count when the wait ran out.
    pub completed_at: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub position: Point,
    pub target: Option<String>,
    pub waiting_since: Option<f64>,
    pub released: Option<Release>,
}

impl AgentState {
    pub fn new(position: Point) -> Self {
        AgentState {
            position,
            target: None,
            waiting_since: None,
            released: None,
        }
    }

    /// Folds a decision taken at `now` into the state.
    pub fn record(&mut self, decision: &RobotDecision, completed: usize, now: f64) {
        self.target = Some(decision.target.clone());
        self.waiting_since = if decision.mode == DecisionMode::WaitAtTarget {
            self.waiting_since.or(Some(now))
        } else {
            None
        };
        if let Some(task) = &decision.released {
            self.released = Some(Release {
                task: task.clone(),
                completed_at: completed,
            });
        }
    }
}

/// What the robot can see of the world on a tick.
#[derive(Debug, Clone, Copy)]
pub struct TaskView<'a> {
    pub tasks: &'a [Task],
    pub completed: &'a BTreeSet<String>,
    pub human: Point,
}

impl<'a> TaskView<'a> {
    pub fn remaining(&self) -> impl Iterator<Item = &'a Task> + '_ {
        self.tasks
            .iter()
            .filter(|t| !self.completed.contains(&t.id))
    }

    fn open(&self, id: &str) -> Option<&'a Task> {
        self.remaining().find(|t| t.id == id)
    }
}

/// True iff the current target is set, uncompleted and within `r_commit`.
pub fn is_committed(state: &AgentState, view: &TaskView, r_commit: f64) -> bool {
    state
        .target
        .as_deref()
        .and_then(|id| view.open(id))
        .is_some_and(|t| state.position.distance(t.position) <= r_commit)
}

fn nearest<'a>(from: Point, tasks: impl Iterator<Item = &'a Task>) -> Option<&'a Task> {
    let mut best: Option<(&Task, f64)> = None;
    for t in tasks {
        let d = from.distance(t.position);
        if best.is_none_or(|(_, b)| d < b) {
            best = Some((t, d));
        }
    }
    best.map(|(t, _)| t)
}

/// Nearest uncompleted task, ignoring intent.
pub fn baseline_nearest(
    state: &AgentState,
    view: &TaskView,
) -> Result<RobotDecision, CoordinationError> {
    nearest(state.position, view.remaining())
        .map(|t| RobotDecision::new(&t.id, DecisionMode::NearestFallback))
        .ok_or(CoordinationError::EmptyTaskSet)
}

/// The released task, while the release still applies.
fn excluded<'a>(state: &'a AgentState, view: &TaskView) -> Option<&'a str> {
    let r = state.released.as_ref()?;
    let task = view.open(&r.task)?;
    let others = view.remaining().any(|t| t.id != r.task);
    let human_there = view.human.distance(task.position) <= task.completion_radius;
    (others && !human_there && view.completed.len() == r.completed_at).then_some(r.task.as_str())
}

pub fn select_action(
    state: &AgentState,
    belief: &IntentBelief,
    view: &TaskView,
    params: &CoordinationParams,
    now: f64,
) -> Result<RobotDecision, CoordinationError> {
    if view.remaining().next().is_none() {
        return Err(CoordinationError::EmptyTaskSet);
    }
    let mut skip = excluded(state, view).map(str::to_string);
    let current = state.target.as_deref().and_then(|id| view.open(id));
    let mut released = None;

    if let Some(cur) = current.filter(|c| skip.as_deref() != Some(c.id.as_str())) {
        if is_committed(state, view, params.r_commit) {
            match wait_status(state, cur, view, params, now) {
                Wait::Waiting => {
                    return Ok(RobotDecision::new(&cur.id, DecisionMode::WaitAtTarget))
                }
                Wait::Expired => {
                    released = Some(cur.id.clone());
                    skip = released.clone();
                }
                Wait::NotAtTask => {
                    return Ok(RobotDecision::new(&cur.id, DecisionMode::KeepCurrent))
                }
            }
        }
    }

    let mut decision = by_intent(state, belief, view, params, now, current, skip.as_deref())?;
    decision.released = released;
    Ok(decision)
}

enum Wait {
    NotAtTask,
    Waiting,
    Expired,
}

fn wait_status(
    state: &AgentState,
    task: &Task,
    view: &TaskView,
    params: &CoordinationParams,
    now: f64,
) -> Wait {
    let at_task = state.position.distance(task.position) <= task.completion_radius;
    let human_absent = view.human.distance(task.position) > task.completion_radius;
    if task.kind != TaskKind::Cooperative || !at_task || !human_absent {
        return Wait::NotAtTask;
    }
    match state.waiting_since {
        Some(t0) if now - t0 >= params.wait_timeout - 1e-9 => Wait::Expired,
        _ => Wait::Waiting,
    }
}

fn by_intent(
    state: &AgentState,
    belief: &IntentBelief,
    view: &TaskView,
    params: &CoordinationParams,
    now: f64,
    current: Option<&Task>,
    skip: Option<&str>,
) -> Result<RobotDecision, CoordinationError> {
    let allowed = || view.remaining().filter(|t| Some(t.id.as_str()) != skip);
    let fallback = || {
        nearest(state.position, allowed())
            .or_else(|| nearest(state.position, view.remaining()))
            .map(|t| RobotDecision::new(&t.id, DecisionMode::NearestFallback))
            .ok_or(CoordinationError::EmptyTaskSet)
    };

    let top = belief
        .top()
        .filter(|(id, p)| *p > 0.0 && view.open(id).is_some());
    let confident = top.filter(|(_, rho)| *rho >= params.tau_intent);
    let Some((goal_id, _)) = confident else {
        return match current {
            Some(cur) => Ok(RobotDecision::new(&cur.id, DecisionMode::KeepCurrent)),
            None => fallback(),
        };
    };
    let goal = view
        .open(goal_id)
        .ok_or_else(|| CoordinationError::UnknownTask(goal_id.to_string()))?;
    if Some(goal.id.as_str()) == skip {
        return fallback();
    }
    match goal.kind {
        TaskKind::Cooperative => {
            if current.is_some_and(|c| c.id == goal.id) {
                if let Wait::Waiting = wait_status(state, goal, view, params, now) {
                    return Ok(RobotDecision::new(&goal.id, DecisionMode::WaitAtTarget));
                }
            }
            Ok(RobotDecision::new(
                &goal.id,
                DecisionMode::PursueCooperative,
            ))
        }
        TaskKind::Independent => {
            let other = nearest(
                state.position,
                allowed().filter(|t| t.kind == TaskKind::Independent && t.id != goal.id),
            );
            Ok(match other {
                Some(t) => RobotDecision::new(&t.id, DecisionMode::ComplementIndependent),
                None => RobotDecision::new(&goal.id, DecisionMode::PursueIndependent),
            })
        }
    }
}
