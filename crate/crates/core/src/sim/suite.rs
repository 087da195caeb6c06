//! Benchmark suites: every mode-1 scenario under each strategy and every
//! mode-2 layout × human case under both robot policies.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::bundled::{bundled_layouts, bundled_mode1_suite};
use super::metrics::{compute_metrics, mean_se, MeanSe, Mode1Metrics};
use super::mode1::{run_mode1_episode, Mode1Options, Mode1Report, Strategy};
use super::mode2::{run_mode2_episode, Layout, Mode2Options, RobotPolicy, ScriptedHuman};
use super::SimError;
use crate::world::{Scenario, WorldError};

#[derive(Debug, Clone)]
pub struct SuiteSpec {
    pub seed: u64,
    pub mode1: Vec<(String, Scenario)>,
    pub mode2: Vec<Layout>,
    pub mode1_options: Mode1Options,
    pub mode2_options: Mode2Options,
}

#[derive(Deserialize)]
struct SuiteFile {
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    mode1: Vec<PathBuf>,
    #[serde(default)]
    mode2: Vec<PathBuf>,
}

impl SuiteSpec {
    fn with(mode1: Vec<(String, Scenario)>, mode2: Vec<Layout>) -> Self {
        SuiteSpec {
            seed: 0,
            mode1,
            mode2,
            mode1_options: Mode1Options::default(),
            mode2_options: Mode2Options::default(),
        }
    }

    /// Both bundled suites.
    pub fn bundled() -> Self {
        Self::with(bundled_mode1_suite(), bundled_layouts())
    }

    pub fn bundled_mode1() -> Self {
        Self::with(bundled_mode1_suite(), vec![])
    }

    pub fn bundled_mode2() -> Self {
        Self::with(vec![], bundled_layouts())
    }

    /// `bundled`, `mode1`, `mode2`, or the path of a suite file listing
    /// scenario and layout files (relative to the suite file).
    pub fn resolve(name: &str) -> Result<Self, SimError> {
        match name {
            "bundled" | "all" => Ok(Self::bundled()),
            "mode1" => Ok(Self::bundled_mode1()),
            "mode2" => Ok(Self::bundled_mode2()),
            path => Self::load(path),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        let path = path.as_ref();
        let read = |p: &Path| {
            std::fs::read_to_string(p).map_err(|source| WorldError::Io {
                path: p.display().to_string(),
                source,
            })
        };
        let file: SuiteFile = serde_json::from_str(&read(path)?).map_err(WorldError::from)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut mode1 = Vec::new();
        for p in &file.mode1 {
            let full = base.join(p);
            let name = p.file_stem().map_or_else(
                || p.display().to_string(),
                |s| s.to_string_lossy().into_owned(),
            );
            mode1.push((name, Scenario::load(&full)?));
        }
        let mut mode2 = Vec::new();
        for p in &file.mode2 {
            mode2.push(Layout::load(base.join(p))?);
        }
        Ok(SuiteSpec {
            seed: file.seed,
            ..Self::with(mode1, mode2)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode1Row {
    pub strategy: Strategy,
    pub metrics: Mode1Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode1Episode {
    pub scenario: String,
    pub strategy: Strategy,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub target_queries: usize,
    pub query_events: usize,
    pub objects_verified: usize,
    pub path_length_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode2Row {
    pub policy: RobotPolicy,
    pub episodes: usize,
    pub finished: usize,
    pub time: MeanSe,
    pub total_dist: MeanSe,
    pub human_dist: MeanSe,
    pub avg_true_target_prob: MeanSe,
    pub top1_accuracy: MeanSe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode2Episode {
    pub layout: String,
    pub human: String,
    pub policy: RobotPolicy,
    pub seed: u64,
    pub finished: bool,
    pub time: f64,
    pub total_dist: f64,
    pub human_dist: f64,
    pub avg_true_target_prob: f64,
    pub top1_accuracy: f64,
    pub final_expected_remaining: f64,
}

/// Intent-estimate quality per human case, under the intent policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentRow {
    pub human: String,
    pub avg_true_target_prob: MeanSe,
    pub top1_accuracy: MeanSe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub mode1: Vec<Mode1Row>,
    pub mode1_episodes: Vec<Mode1Episode>,
    pub mode2: Vec<Mode2Row>,
    pub intent: Vec<IntentRow>,
    pub mode2_episodes: Vec<Mode2Episode>,
}

/// Per-episode seed: stable in the suite seed and the episode's position.
fn episode_seed(seed: u64, layout: usize, case: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((layout as u64) << 8 | case as u64)
}

pub fn run_suite(spec: &SuiteSpec) -> Result<SuiteReport, SimError> {
    let mut mode1_episodes = Vec::new();
    let mut mode1 = Vec::new();
    if !spec.mode1.is_empty() {
        let mut by_strategy: Vec<(Strategy, Vec<Mode1Report>)> = Vec::new();
        for strategy in Strategy::ALL {
            let mut reports = Vec::new();
            for (name, scenario) in &spec.mode1 {
                let truth = scenario
                    .ground_truth
                    .clone()
                    .ok_or_else(|| SimError::MissingGroundTruth(format!("scenario {name}")))?;
                let report = run_mode1_episode(scenario, &truth, strategy, &spec.mode1_options)?;
                mode1_episodes.push(Mode1Episode {
                    scenario: name.clone(),
                    strategy,
                    success: report.success,
                    failure: report.failure.clone(),
                    target_queries: report.result.target_queries,
                    query_events: report.result.query_events,
                    objects_verified: report.result.objects_verified,
                    path_length_m: report.result.path_length_m,
                });
                reports.push(report);
            }
            by_strategy.push((strategy, reports));
        }
        for (strategy, reports) in &by_strategy {
            let refs: Vec<&Mode1Report> = reports.iter().collect();
            mode1.push(Mode1Row {
                strategy: *strategy,
                metrics: Mode1Metrics::from_reports(&refs),
            });
        }
    }

    let mut mode2_episodes = Vec::new();
    for (li, layout) in spec.mode2.iter().enumerate() {
        for (ci, (label, human)) in ScriptedHuman::cases(layout).into_iter().enumerate() {
            let seed = episode_seed(spec.seed, li, ci);
            for policy in [RobotPolicy::Intent, RobotPolicy::Nearest] {
                let options = Mode2Options {
                    seed,
                    ..spec.mode2_options.clone()
                };
                let log = run_mode2_episode(layout, &human, policy, &options)?;
                let m = compute_metrics(&log);
                mode2_episodes.push(Mode2Episode {
                    layout: layout.name.clone(),
                    human: label.clone(),
                    policy,
                    seed,
                    finished: m.finished,
                    time: m.time,
                    total_dist: m.total_dist,
                    human_dist: m.human_dist,
                    avg_true_target_prob: m.avg_true_target_prob,
                    top1_accuracy: m.top1_accuracy,
                    final_expected_remaining: m
                        .expected_remaining_dist
                        .last()
                        .copied()
                        .unwrap_or(0.0),
                });
            }
        }
    }

    let mut mode2 = Vec::new();
    let mut intent = Vec::new();
    if !mode2_episodes.is_empty() {
        for policy in [RobotPolicy::Intent, RobotPolicy::Nearest] {
            let eps: Vec<&Mode2Episode> = mode2_episodes
                .iter()
                .filter(|e| e.policy == policy)
                .collect();
            let col = |f: fn(&Mode2Episode) -> f64| {
                mean_se(&eps.iter().map(|e| f(e)).collect::<Vec<_>>())
            };
            mode2.push(Mode2Row {
                policy,
                episodes: eps.len(),
                finished: eps.iter().filter(|e| e.finished).count(),
                time: col(|e| e.time),
                total_dist: col(|e| e.total_dist),
                human_dist: col(|e| e.human_dist),
                avg_true_target_prob: col(|e| e.avg_true_target_prob),
                top1_accuracy: col(|e| e.top1_accuracy),
            });
        }
        let mut labels: Vec<String> = Vec::new();
        for e in &mode2_episodes {
            if !labels.contains(&e.human) {
                labels.push(e.human.clone());
            }
        }
        for label in labels {
            let eps: Vec<&Mode2Episode> = mode2_episodes
                .iter()
                .filter(|e| e.human == label && e.policy == RobotPolicy::Intent)
                .collect();
            intent.push(IntentRow {
                avg_true_target_prob: mean_se(
                    &eps.iter()
                        .map(|e| e.avg_true_target_prob)
                        .collect::<Vec<_>>(),
                ),
                top1_accuracy: mean_se(&eps.iter().map(|e| e.top1_accuracy).collect::<Vec<_>>()),
                human: label,
            });
        }
    }

    Ok(SuiteReport {
        seed: spec.seed,
        mode1,
        mode1_episodes,
        mode2,
        intent,
        mode2_episodes,
    })
}

impl SuiteReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if !self.mode1.is_empty() {
            let _ = writeln!(s, "Mode 1: {} scenarios", self.mode1[0].metrics.episodes);
            let _ = writeln!(
                s,
                "{:<11} {:>8} {:>16} {:>16} {:>16} {:>16}",
                "strategy",
                "success",
                "query events",
                "objects checked",
                "target queries",
                "path (m)"
            );
            for row in &self.mode1 {
                let m = &row.metrics;
                let _ = writeln!(
                    s,
                    "{:<11} {:>7.1}% {:>16} {:>16} {:>16} {:>16}",
                    row.strategy.to_string(),
                    m.success_rate * 100.0,
                    m.query_events.to_string(),
                    m.objects_verified.to_string(),
                    m.target_queries.to_string(),
                    m.path_length_m.to_string(),
                );
            }
            let _ = writeln!(s);
        }
        if !self.mode2.is_empty() {
            let _ = writeln!(s, "Mode 2: {} episodes per policy", self.mode2[0].episodes);
            let _ = writeln!(s, "{:<16} {:>16} {:>16}", "metric", "intent", "nearest");
            let pick = |f: fn(&Mode2Row) -> MeanSe| -> Vec<String> {
                self.mode2.iter().map(|r| f(r).to_string()).collect()
            };
            for (label, vals) in [
                ("Time (s)", pick(|r| r.time)),
                ("Total Dist (m)", pick(|r| r.total_dist)),
                ("Human Dist (m)", pick(|r| r.human_dist)),
            ] {
                let _ = writeln!(s, "{:<16} {:>16} {:>16}", label, vals[0], vals[1]);
            }
            let _ = writeln!(s);
            let _ = writeln!(
                s,
                "{:<12} {:>16} {:>16}",
                "human", "avg true prob", "top-1 acc"
            );
            for row in &self.intent {
                let _ = writeln!(
                    s,
                    "{:<12} {:>16} {:>16}",
                    row.human,
                    row.avg_true_target_prob.to_string(),
                    row.top1_accuracy.to_string()
                );
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_episode_has_zero_error() {
        let mut spec = SuiteSpec::bundled_mode2();
        spec.mode2.truncate(1);
        let report = run_suite(&spec).unwrap();
        assert!(report.mode2_episodes.len() == 6);
        let one = mean_se(&[report.mode2_episodes[0].time]);
        assert_eq!(one.se, 0.0);
    }

    #[test]
    fn reports_repeat_byte_for_byte() {
        let spec = SuiteSpec::bundled_mode2();
        assert_eq!(
            run_suite(&spec).unwrap().to_json(),
            run_suite(&spec).unwrap().to_json()
        );
    }
}
