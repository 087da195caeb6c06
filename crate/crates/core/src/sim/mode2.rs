//! Mode-2 episodes: a scripted human and the robot share a task layout.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::coordination::{
    baseline_nearest, select_action, AgentState, CoordinationParams, RobotDecision, TaskView,
};
use crate::intent::{update_belief, HumanTrace, IntentBelief, IntentParams};
use crate::world::{Point, Task, TaskKind, WorldError};

/// Task arrangement plus the human's intended visit orders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub name: String,
    pub human_start: Point,
    pub robot_start: Point,
    pub tasks: Vec<Task>,
    /// Commitment radius used on this layout, m.
    pub r_commit: f64,
    /// Visit orders for the scripted behaviors.
    pub plans: Vec<Vec<String>>,
}

impl Layout {
    pub fn validate(&self) -> Result<(), WorldError> {
        if self.tasks.is_empty() {
            return Err(WorldError::invalid("tasks", "layout has no tasks"));
        }
        let mut seen = BTreeSet::new();
        for (i, t) in self.tasks.iter().enumerate() {
            if !seen.insert(&t.id) {
                return Err(WorldError::invalid(
                    format!("tasks[{i}].id"),
                    format!("duplicate task id \"{}\"", t.id),
                ));
            }
            if !(t.completion_radius > 0.0) {
                return Err(WorldError::invalid(
                    format!("tasks[{i}].completion_radius"),
                    "must be positive",
                ));
            }
        }
        if !(self.r_commit > 0.0) {
            return Err(WorldError::invalid("r_commit", "must be positive"));
        }
        for (i, plan) in self.plans.iter().enumerate() {
            for id in plan {
                if !self.tasks.iter().any(|t| &t.id == id) {
                    return Err(WorldError::invalid(
                        format!("plans[{i}]"),
                        format!("unknown task \"{id}\""),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, WorldError> {
        let layout: Layout = serde_json::from_str(text)?;
        layout.validate()?;
        Ok(layout)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, WorldError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| WorldError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("layout serializes")
    }

    fn plan(&self, index: usize) -> Vec<String> {
        self.plans
            .get(index)
            .cloned()
            .unwrap_or_else(|| self.tasks.iter().map(|t| t.id.clone()).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Behavior {
    Rational,
    Ambiguous,
    /// Moved by an operator rather than a script.
    Teleoperated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedHuman {
    pub behavior: Behavior,
    pub plan: Vec<String>,
    /// m/s
    pub speed: f64,
    /// Std-dev of the per-tick heading perturbation, rad.
    pub heading_noise: f64,
    /// Longest wait at a cooperative task, s.
    pub wait_timeout: f64,
    /// When the next two plan tasks are swapped (ambiguous only), s.
    pub swap_after: f64,
}

impl ScriptedHuman {
    pub fn rational(plan: Vec<String>) -> Self {
        ScriptedHuman {
            behavior: Behavior::Rational,
            plan,
            speed: 1.0,
            heading_noise: 0.0,
            wait_timeout: 5.0,
            swap_after: f64::INFINITY,
        }
    }

    pub fn ambiguous(plan: Vec<String>) -> Self {
        ScriptedHuman {
            behavior: Behavior::Ambiguous,
            heading_noise: 0.6,
            swap_after: 2.0,
            ..ScriptedHuman::rational(plan)
        }
    }

    /// The three scripted cases used by the benchmarks: the layout's two
    /// plans followed rationally, and the first plan followed ambiguously.
    pub fn cases(layout: &Layout) -> Vec<(String, ScriptedHuman)> {
        vec![
            ("rational-1".into(), ScriptedHuman::rational(layout.plan(0))),
            ("rational-2".into(), ScriptedHuman::rational(layout.plan(1))),
            ("ambiguous".into(), ScriptedHuman::ambiguous(layout.plan(0))),
        ]
    }

    pub fn from_json(text: &str) -> Result<Self, WorldError> {
        let h: ScriptedHuman = serde_json::from_str(text)?;
        if !(h.speed > 0.0) {
            return Err(WorldError::invalid("speed", "must be positive"));
        }
        Ok(h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RobotPolicy {
    Intent,
    Nearest,
}

impl fmt::Display for RobotPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RobotPolicy::Intent => "intent",
            RobotPolicy::Nearest => "nearest",
        })
    }
}

impl FromStr for RobotPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "intent" => Ok(RobotPolicy::Intent),
            "nearest" => Ok(RobotPolicy::Nearest),
            other => Err(format!("unknown policy \"{other}\"")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mode2Options {
    pub intent: IntentParams,
    pub coordination: CoordinationParams,
    /// m/s
    pub robot_speed: f64,
    /// s
    pub tick_dt: f64,
    pub max_ticks: usize,
    pub seed: u64,
}

impl Default for Mode2Options {
    fn default() -> Self {
        Mode2Options {
            intent: IntentParams::default(),
            coordination: CoordinationParams::default(),
            robot_speed: 1.0,
            tick_dt: 0.1,
            max_ticks: 3000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub t: f64,
    pub human: Point,
    pub robot: Point,
    pub belief: Vec<(String, f64)>,
    pub top: String,
    pub rho: f64,
    pub decision: RobotDecision,
    /// Tasks completed on this tick.
    pub completed: Vec<String>,
    /// Subset of `completed` the human took part in.
    pub human_completed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub layout: String,
    pub policy: RobotPolicy,
    pub behavior: Behavior,
    pub seed: u64,
    pub tick_dt: f64,
    pub human_start: Point,
    pub robot_start: Point,
    pub tasks: Vec<Task>,
    pub ticks: Vec<TickRecord>,
    /// All tasks completed within the tick budget.
    pub finished: bool,
}

impl EpisodeLog {
    /// One JSON object per tick.
    pub fn write_jsonl(&self, out: &mut dyn Write) -> std::io::Result<()> {
        for tick in &self.ticks {
            serde_json::to_writer(&mut *out, tick)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// The human's moving parts during an episode.
struct HumanAgent {
    spec: ScriptedHuman,
    order: Vec<String>,
    position: Point,
    waiting_since: Option<f64>,
    swapped: bool,
    noise: Option<Normal<f64>>,
}

impl HumanAgent {
    fn new(spec: &ScriptedHuman, start: Point) -> Self {
        let noise = (spec.heading_noise > 0.0)
            .then(|| Normal::new(0.0, spec.heading_noise).expect("finite std-dev"));
        HumanAgent {
            spec: spec.clone(),
            order: spec.plan.clone(),
            position: start,
            waiting_since: None,
            swapped: false,
            noise,
        }
    }

    fn step<R: Rng>(
        &mut self,
        t: f64,
        dt: f64,
        tasks: &[Task],
        completed: &BTreeSet<String>,
        rng: &mut R,
    ) {
        let open: Vec<usize> = (0..self.order.len())
            .filter(|&i| !completed.contains(&self.order[i]))
            .collect();
        if !self.swapped && t >= self.spec.swap_after && open.len() >= 2 {
            self.order.swap(open[0], open[1]);
            self.swapped = true;
        }
        let Some(goal_id) = self
            .order
            .iter()
            .find(|id| !completed.contains(*id))
            .cloned()
        else {
            return;
        };
        let goal = tasks
            .iter()
            .find(|t| t.id == goal_id)
            .expect("plan ids are layout tasks");
        let at_goal = self.position.distance(goal.position) <= goal.completion_radius;
        if at_goal && goal.kind == TaskKind::Cooperative {
            let since = *self.waiting_since.get_or_insert(t);
            if t - since >= self.spec.wait_timeout - 1e-9 && open.len() > 1 {
                // Give up for now and come back after the rest of the plan.
                let i = self
                    .order
                    .iter()
                    .position(|id| *id == goal_id)
                    .expect("goal is in order");
                let id = self.order.remove(i);
                self.order.push(id);
                self.waiting_since = None;
            }
            return;
        }
        self.waiting_since = None;
        let to_goal = goal.position - self.position;
        let dist = to_goal.norm();
        let step = self.spec.speed * dt;
        if dist <= step {
            self.position = goal.position;
            return;
        }
        let mut dir = to_goal.scale(1.0 / dist);
        if let Some(noise) = &self.noise {
            let a: f64 = noise.sample(rng);
            dir = Point::new(
                dir.x * a.cos() - dir.y * a.sin(),
                dir.x * a.sin() + dir.y * a.cos(),
            );
        }
        self.position = self.position + dir.scale(step);
    }
}

fn within(p: Point, task: &Task) -> bool {
    p.distance(task.position) <= task.completion_radius
}

/// A mode-2 episode advanced one tick at a time. The human is either
/// scripted or teleoperated through [`Mode2Sim::step`].
pub struct Mode2Sim {
    layout: Layout,
    policy: RobotPolicy,
    options: Mode2Options,
    params: CoordinationParams,
    behavior: Behavior,
    scripted: Option<HumanAgent>,
    rng: ChaCha8Rng,
    human: Point,
    robot: AgentState,
    completed: BTreeSet<String>,
    belief: IntentBelief,
    ticks: Vec<TickRecord>,
}

impl Mode2Sim {
    /// `human: None` leaves the human to external moves.
    pub fn new(
        layout: &Layout,
        human: Option<&ScriptedHuman>,
        policy: RobotPolicy,
        options: &Mode2Options,
    ) -> Result<Self, SimError> {
        layout.validate()?;
        options.intent.validate()?;
        if !(options.tick_dt > 0.0) {
            return Err(SimError::InvalidOption(format!(
                "tick_dt {} must be positive",
                options.tick_dt
            )));
        }
        if let Some(h) = human {
            if !(h.speed > 0.0) {
                return Err(SimError::InvalidOption(format!(
                    "human speed {} must be positive",
                    h.speed
                )));
            }
        }
        let completed = BTreeSet::new();
        Ok(Mode2Sim {
            params: CoordinationParams {
                r_commit: layout.r_commit,
                ..options.coordination
            },
            behavior: human.map_or(Behavior::Teleoperated, |h| h.behavior),
            scripted: human.map(|h| HumanAgent::new(h, layout.human_start)),
            rng: ChaCha8Rng::seed_from_u64(options.seed),
            human: layout.human_start,
            robot: AgentState::new(layout.robot_start),
            belief: IntentBelief::uniform(&layout.tasks, &completed)?,
            completed,
            ticks: Vec::new(),
            layout: layout.clone(),
            policy,
            options: options.clone(),
        })
    }

    pub fn is_finished(&self) -> bool {
        self.completed.len() == self.layout.tasks.len()
    }

    pub fn out_of_ticks(&self) -> bool {
        self.ticks.len() >= self.options.max_ticks
    }

    pub fn time(&self) -> f64 {
        self.ticks.len() as f64 * self.options.tick_dt
    }

    pub fn human(&self) -> Point {
        self.human
    }

    pub fn robot(&self) -> Point {
        self.robot.position
    }

    pub fn completed(&self) -> &BTreeSet<String> {
        &self.completed
    }

    pub fn belief(&self) -> &IntentBelief {
        &self.belief
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn ticks(&self) -> &[TickRecord] {
        &self.ticks
    }

    /// Advances one tick. `human_to` places a teleoperated human; it is
    /// ignored when the human is scripted.
    pub fn step(&mut self, human_to: Option<Point>) -> Result<&TickRecord, SimError> {
        if self.is_finished() {
            return Err(SimError::UnexpectedInput(
                "episode is already finished".into(),
            ));
        }
        if self.out_of_ticks() {
            return Err(SimError::TickBudgetExceeded(self.options.max_ticks));
        }
        let dt = self.options.tick_dt;
        let t = self.time();
        let tasks = &self.layout.tasks;
        let before = self.human;
        match &mut self.scripted {
            Some(agent) => {
                agent.step(t, dt, tasks, &self.completed, &mut self.rng);
                self.human = agent.position;
            }
            None => self.human = human_to.unwrap_or(self.human),
        }
        let trace = HumanTrace::new(before, self.human);
        self.belief = update_belief(
            &self.belief,
            &trace,
            tasks,
            &self.completed,
            &self.options.intent,
        )?;
        let (top, rho) = self
            .belief
            .top()
            .map(|(id, p)| (id.to_string(), p))
            .expect("tasks remain");

        let view = TaskView {
            tasks,
            completed: &self.completed,
            human: self.human,
        };
        let decision = match self.policy {
            RobotPolicy::Intent => {
                select_action(&self.robot, &self.belief, &view, &self.params, t)?
            }
            RobotPolicy::Nearest => baseline_nearest(&self.robot, &view)?,
        };
        self.robot.record(&decision, self.completed.len(), t);
        let target = tasks
            .iter()
            .find(|t| t.id == decision.target)
            .expect("decisions name tasks");
        self.robot.position = self
            .robot
            .position
            .step_toward(target.position, self.options.robot_speed * dt);

        let mut done_now = Vec::new();
        let mut by_human = Vec::new();
        for task in tasks.iter().filter(|t| !self.completed.contains(&t.id)) {
            let h = within(self.human, task);
            let r = within(self.robot.position, task);
            let done = match task.kind {
                TaskKind::Independent => h || r,
                TaskKind::Cooperative => h && r,
            };
            if done {
                done_now.push(task.id.clone());
                if h {
                    by_human.push(task.id.clone());
                }
            }
        }
        self.completed.extend(done_now.iter().cloned());
        self.ticks.push(TickRecord {
            t: t + dt,
            human: self.human,
            robot: self.robot.position,
            belief: self.belief.probs.clone(),
            top,
            rho,
            decision,
            completed: done_now,
            human_completed: by_human,
        });
        Ok(self.ticks.last().expect("just pushed"))
    }

    pub fn log(&self) -> EpisodeLog {
        EpisodeLog {
            layout: self.layout.name.clone(),
            policy: self.policy,
            behavior: self.behavior,
            seed: self.options.seed,
            tick_dt: self.options.tick_dt,
            human_start: self.layout.human_start,
            robot_start: self.layout.robot_start,
            tasks: self.layout.tasks.clone(),
            ticks: self.ticks.clone(),
            finished: self.is_finished(),
        }
    }
}

/// Runs one episode until every task is complete or the tick budget runs out.
pub fn run_mode2_episode(
    layout: &Layout,
    human: &ScriptedHuman,
    policy: RobotPolicy,
    options: &Mode2Options,
) -> Result<EpisodeLog, SimError> {
    let mut sim = Mode2Sim::new(layout, Some(human), policy, options)?;
    while !sim.is_finished() && !sim.out_of_ticks() {
        sim.step(None)?;
    }
    Ok(sim.log())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout() -> Layout {
        Layout {
            name: "example".into(),
            human_start: Point::new(0.0, 0.0),
            robot_start: Point::new(0.0, 1.0),
            tasks: vec![
                Task::new("A", Point::new(4.0, 3.0), TaskKind::Independent),
                Task::new("B", Point::new(4.0, -3.0), TaskKind::Independent),
                Task::new("C", Point::new(8.0, 0.0), TaskKind::Cooperative),
            ],
            r_commit: 1.5,
            plans: vec![
                vec!["A".into(), "C".into(), "B".into()],
                vec!["B".into(), "C".into(), "A".into()],
            ],
        }
    }

    #[test]
    fn intent_robot_complements_then_joins() {
        let l = layout();
        let log = run_mode2_episode(
            &l,
            &ScriptedHuman::rational(l.plans[0].clone()),
            RobotPolicy::Intent,
            &Mode2Options::default(),
        )
        .unwrap();
        assert!(log.finished);
        let by_human: Vec<&String> = log.ticks.iter().flat_map(|t| &t.human_completed).collect();
        assert_eq!(by_human, ["A", "C"]);
        let b_tick = log
            .ticks
            .iter()
            .find(|t| t.completed.contains(&"B".to_string()))
            .unwrap();
        assert!(b_tick.human_completed.is_empty());
    }

    #[test]
    fn single_task_at_human_start() {
        let l = Layout {
            name: "trivial".into(),
            human_start: Point::new(0.0, 0.0),
            robot_start: Point::new(5.0, 5.0),
            tasks: vec![Task::new("A", Point::new(0.0, 0.0), TaskKind::Independent)],
            r_commit: 1.5,
            plans: vec![vec!["A".into()]],
        };
        for policy in [RobotPolicy::Intent, RobotPolicy::Nearest] {
            let log = run_mode2_episode(
                &l,
                &ScriptedHuman::rational(vec!["A".into()]),
                policy,
                &Mode2Options::default(),
            )
            .unwrap();
            assert!(log.finished);
            assert_eq!(log.ticks.len(), 1);
            assert_eq!(log.ticks[0].human_completed, vec!["A"]);
        }
    }

    #[test]
    fn seeded_runs_repeat() {
        let l = layout();
        let h = ScriptedHuman::ambiguous(l.plans[0].clone());
        let o = Mode2Options {
            seed: 11,
            ..Mode2Options::default()
        };
        let a = run_mode2_episode(&l, &h, RobotPolicy::Intent, &o).unwrap();
        let b = run_mode2_episode(&l, &h, RobotPolicy::Intent, &o).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_dt_is_rejected() {
        let l = layout();
        let o = Mode2Options {
            tick_dt: 0.0,
            ..Mode2Options::default()
        };
        assert!(matches!(
            run_mode2_episode(
                &l,
                &ScriptedHuman::rational(vec![]),
                RobotPolicy::Nearest,
                &o
            ),
            Err(SimError::InvalidOption(_))
        ));
    }
}
