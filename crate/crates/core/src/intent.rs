//! Belief over which task the human is heading for.
//!
//! Each tick, every remaining task gets an evidence score from its distance
//! to the human and from how well the human's heading points at it. The score
//! is blended into the previous belief and renormalized.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{Point, Task};

#[derive(Debug, Error, PartialEq)]
pub enum IntentError {
    #[error("no remaining tasks")]
    EmptyTaskSet,
    #[error("invalid intent parameter {name}: {value}")]
    InvalidParam { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntentParams {
    /// Distance sensitivity, 1/m.
    pub alpha: f64,
    /// Weight of the heading cue.
    pub beta: f64,
    /// Smoothing rate in (0, 1].
    pub gamma: f64,
    /// Minimum per-tick displacement for the heading to count, m.
    pub epsilon: f64,
}

impl Default for IntentParams {
    fn default() -> Self {
        IntentParams {
            alpha: 0.3,
            beta: 1.0,
            gamma: 0.3,
            epsilon: 0.05,
        }
    }
}

impl IntentParams {
    pub fn validate(&self) -> Result<(), IntentError> {
        let bad = |name, value| Err(IntentError::InvalidParam { name, value });
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha", self.alpha);
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("beta", self.beta);
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma", self.gamma);
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon", self.epsilon);
        }
        Ok(())
    }
}

/// The human's last two observed positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HumanTrace {
    pub previous: Point,
    pub current: Point,
}

impl HumanTrace {
    pub fn new(previous: Point, current: Point) -> Self {
        HumanTrace { previous, current }
    }

    /// Stationary trace at `p`.
    pub fn at(p: Point) -> Self {
        HumanTrace {
            previous: p,
            current: p,
        }
    }

    pub fn velocity(&self) -> Point {
        self.current - self.previous
    }
}

/// Probabilities in task order; completed tasks hold exactly 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentBelief {
    pub probs: Vec<(String, f64)>,
}

impl IntentBelief {
    /// Uniform over the tasks not in `completed`.
    pub fn uniform(tasks: &[Task], completed: &BTreeSet<String>) -> Result<Self, IntentError> {
        let remaining = tasks.iter().filter(|t| !completed.contains(&t.id)).count();
        if remaining == 0 {
            return Err(IntentError::EmptyTaskSet);
        }
        let p = 1.0 / remaining as f64;
        Ok(IntentBelief {
            probs: tasks
                .iter()
                .map(|t| {
                    (
                        t.id.clone(),
                        if completed.contains(&t.id) { 0.0 } else { p },
                    )
                })
                .collect(),
        })
    }

    pub fn prob(&self, task: &str) -> f64 {
        self.probs
            .iter()
            .find(|(id, _)| id == task)
            .map_or(0.0, |(_, p)| *p)
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().map(|(_, p)| p).sum()
    }

    pub fn to_map(&self) -> BTreeMap<String, f64> {
        self.probs.iter().cloned().collect()
    }

    /// Most likely task and its probability; earlier tasks win ties.
    pub fn top(&self) -> Option<(&str, f64)> {
        let mut best: Option<(&str, f64)> = None;
        for (id, p) in &self.probs {
            if best.is_none_or(|(_, b)| *p > b) {
                best = Some((id, *p));
            }
        }
        best
    }
}

/// Heading cue for a task at `target`: cosine between the step direction and
/// the direction to the task, or 0 when the human barely moved.
pub fn heading_cue(trace: &HumanTrace, target: Point, epsilon: f64) -> f64 {
    let v = trace.velocity();
    let speed = v.norm();
    if speed < epsilon {
        return 0.0;
    }
    let to_task = target - trace.current;
    to_task.dot(v) / (speed * to_task.norm().max(epsilon))
}

/// Unnormalized evidence for one task.
pub fn evidence(trace: &HumanTrace, target: Point, params: &IntentParams) -> f64 {
    let d = trace.current.distance(target);
    let c = heading_cue(trace, target, params.epsilon);
    (-params.alpha * d + params.beta * c).exp()
}

/// One smoothing step over `tasks`, with `completed` masked out.
pub fn update_belief(
    prev: &IntentBelief,
    trace: &HumanTrace,
    tasks: &[Task],
    completed: &BTreeSet<String>,
    params: &IntentParams,
) -> Result<IntentBelief, IntentError> {
    let mut probs = Vec::with_capacity(tasks.len());
    let mut total = 0.0;
    for (i, task) in tasks.iter().enumerate() {
        if completed.contains(&task.id) {
            probs.push((task.id.clone(), 0.0));
            continue;
        }
        let before = match prev.probs.get(i) {
            Some((id, p)) if *id == task.id => *p,
            _ => prev.prob(&task.id),
        };
        let mixed =
            (1.0 - params.gamma) * before + params.gamma * evidence(trace, task.position, params);
        total += mixed;
        probs.push((task.id.clone(), mixed));
    }
    if total == 0.0 {
        return Err(IntentError::EmptyTaskSet);
    }
    for (_, p) in &mut probs {
        *p /= total;
    }
    Ok(IntentBelief { probs })
}

/// Most likely task and its confidence.
pub fn top_candidate(belief: &IntentBelief) -> Result<(String, f64), IntentError> {
    belief
        .top()
        .map(|(id, p)| (id.to_string(), p))
        .ok_or(IntentError::EmptyTaskSet)
}
