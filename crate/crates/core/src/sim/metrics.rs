//! Episode metrics and mean ± standard error summaries.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::mode1::Mode1Report;
use super::mode2::EpisodeLog;
use crate::world::{Point, Task, TaskKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Time of the last completion (or of the last tick if unfinished), s.
    pub time: f64,
    pub total_dist: f64,
    pub human_dist: f64,
    pub robot_dist: f64,
    pub avg_true_target_prob: f64,
    pub top1_accuracy: f64,
    /// Ticks with a defined true target.
    pub scored_ticks: usize,
    /// Expected remaining travel after each tick, m.
    pub expected_remaining_dist: Vec<f64>,
    pub finished: bool,
}

/// Greedy estimate of the travel still needed: repeatedly take the cheapest
/// remaining (agent, task) pairing, where a cooperative task costs both
/// agents' trips, and move the agents there.
pub fn expected_remaining_distance(human: Point, robot: Point, remaining: &[&Task]) -> f64 {
    let mut agents = [human, robot];
    let mut open: Vec<&Task> = remaining.to_vec();
    let mut total = 0.0;
    while !open.is_empty() {
        let mut best: Option<(usize, Option<usize>, f64)> = None;
        for (i, task) in open.iter().enumerate() {
            let d = [
                agents[0].distance(task.position),
                agents[1].distance(task.position),
            ];
            let (who, cost) = match task.kind {
                TaskKind::Cooperative => (None, d[0] + d[1]),
                TaskKind::Independent if d[0] <= d[1] => (Some(0), d[0]),
                TaskKind::Independent => (Some(1), d[1]),
            };
            if best.is_none_or(|(_, _, b)| cost < b) {
                best = Some((i, who, cost));
            }
        }
        let (i, who, cost) = best.expect("open is non-empty");
        let task = open.remove(i);
        match who {
            Some(a) => agents[a] = task.position,
            None => agents = [task.position, task.position],
        }
        total += cost;
    }
    total
}

pub fn compute_metrics(log: &EpisodeLog) -> Metrics {
    let mut human_dist = 0.0;
    let mut robot_dist = 0.0;
    let (mut h, mut r) = (log.human_start, log.robot_start);
    let mut completed: BTreeSet<&str> = BTreeSet::new();
    let mut remaining_curve = Vec::with_capacity(log.ticks.len());
    let mut last_completion = 0.0;
    for tick in &log.ticks {
        human_dist += h.distance(tick.human);
        robot_dist += r.distance(tick.robot);
        h = tick.human;
        r = tick.robot;
        completed.extend(tick.completed.iter().map(String::as_str));
        if !tick.completed.is_empty() {
            last_completion = tick.t;
        }
        let open: Vec<&Task> = log
            .tasks
            .iter()
            .filter(|t| !completed.contains(t.id.as_str()))
            .collect();
        remaining_curve.push(expected_remaining_distance(h, r, &open));
    }

    // The true target at a tick is the next task the human helps complete.
    let mut next_human: Option<&str> = None;
    let mut truth: Vec<Option<&str>> = vec![None; log.ticks.len()];
    for (i, tick) in log.ticks.iter().enumerate().rev() {
        if let Some(first) = tick.human_completed.first() {
            next_human = Some(first);
        }
        truth[i] = next_human;
    }
    let mut prob_sum = 0.0;
    let mut hits = 0usize;
    let mut scored = 0usize;
    for (tick, want) in log.ticks.iter().zip(&truth) {
        let Some(want) = want else { continue };
        scored += 1;
        prob_sum += tick
            .belief
            .iter()
            .find(|(id, _)| id == want)
            .map_or(0.0, |(_, p)| *p);
        if tick.top == *want {
            hits += 1;
        }
    }
    let ratio = |x: f64| if scored == 0 { 0.0 } else { x / scored as f64 };

    Metrics {
        time: if log.finished {
            last_completion
        } else {
            log.ticks.last().map_or(0.0, |t| t.t)
        },
        total_dist: human_dist + robot_dist,
        human_dist,
        robot_dist,
        avg_true_target_prob: ratio(prob_sum),
        top1_accuracy: ratio(hits as f64),
        scored_ticks: scored,
        expected_remaining_dist: remaining_curve,
        finished: log.finished,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    /// Standard error of the mean (sample std-dev / sqrt(n)); 0 for n < 2.
    pub se: f64,
    pub n: usize,
}

impl std::fmt::Display for MeanSe {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.2} ± {:.2}", self.mean, self.se)
    }
}

pub fn mean_se(values: &[f64]) -> MeanSe {
    let n = values.len();
    if n == 0 {
        return MeanSe {
            mean: 0.0,
            se: 0.0,
            n,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let se = if n < 2 {
        0.0
    } else {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    };
    MeanSe { mean, se, n }
}

/// Per-strategy aggregate over mode-1 episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode1Metrics {
    pub episodes: usize,
    pub success_rate: f64,
    pub query_events: MeanSe,
    pub objects_verified: MeanSe,
    pub target_queries: MeanSe,
    pub path_length_m: MeanSe,
}

impl Mode1Metrics {
    pub fn from_reports(reports: &[&Mode1Report]) -> Self {
        let col = |f: &dyn Fn(&Mode1Report) -> f64| -> Vec<f64> {
            reports.iter().map(|r| f(r)).collect()
        };
        let successes = reports.iter().filter(|r| r.success).count();
        Mode1Metrics {
            episodes: reports.len(),
            success_rate: if reports.is_empty() {
                0.0
            } else {
                successes as f64 / reports.len() as f64
            },
            query_events: mean_se(&col(&|r| r.result.query_events as f64)),
            objects_verified: mean_se(&col(&|r| r.result.objects_verified as f64)),
            target_queries: mean_se(&col(&|r| r.result.target_queries as f64)),
            path_length_m: mean_se(&col(&|r| r.result.path_length_m)),
        }
    }
}
