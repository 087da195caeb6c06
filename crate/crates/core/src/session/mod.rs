//! Live sessions: one planning episode driven by wire messages and ticks.

pub mod protocol;
pub mod server;

use std::collections::BTreeSet;

use thiserror::Error;

pub use protocol::{EndStatus, Message, SessionMessage, SessionMode};

use crate::sim::{
    EpisodeLog, Layout, Mode1Event, Mode1Options, Mode1Outcome, Mode1Result, Mode1Run,
    Mode2Options, Mode2Sim, RobotPolicy, ScriptedHuman, SimError, Strategy,
};
use crate::world::{Point, Scenario};

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("seq {seq} is not after {last}")]
    StaleSeq { seq: u64, last: u64 },
    #[error("query {0} was already answered")]
    DuplicateAnswer(u64),
    #[error("no query is pending")]
    NoPendingQuery,
    #[error("pending query is {expected}, not {got}")]
    WrongReply { expected: u64, got: u64 },
    #[error("{0} does not answer the pending query")]
    WrongAnswerKind(&'static str),
    #[error("{kind} is not accepted in {mode:?}")]
    WrongMode {
        kind: &'static str,
        mode: SessionMode,
    },
    #[error("{0} is sent by the server only")]
    ServerOnly(&'static str),
    #[error("the episode is over")]
    EpisodeOver,
    #[error("the human is scripted in this session")]
    ScriptedHuman,
    #[error("rejected answer: {0}")]
    InvalidAnswer(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum QueryKind {
    Target,
    Traversability,
}

#[derive(Debug, Clone, Copy)]
struct PendingQuery {
    seq: u64,
    kind: QueryKind,
}

enum Engine {
    Mode1 {
        run: Box<Mode1Run>,
        result: Option<Box<Mode1Result>>,
    },
    Mode2 {
        sim: Box<Mode2Sim>,
        teleoperated: bool,
        human_to: Option<Point>,
    },
}

pub struct Session {
    id: u64,
    next_seq: u64,
    last_client_seq: Option<u64>,
    answered: BTreeSet<u64>,
    pending: Option<PendingQuery>,
    engine: Engine,
    ended: bool,
}

impl Session {
    /// Starts a mode-1 session and returns the opening messages: the scene,
    /// then the first query or the final path.
    pub fn mode1(
        id: u64,
        scenario: &Scenario,
        strategy: Strategy,
        options: Mode1Options,
    ) -> Result<(Self, Vec<SessionMessage>), SimError> {
        let run = Mode1Run::new(scenario, strategy, options)?;
        let mut session = Session::with_engine(
            id,
            Engine::Mode1 {
                run: Box::new(run),
                result: None,
            },
        );
        let start = scenario.scene.start;
        let mut out = vec![session.emit(Message::ScenarioLoaded {
            session: id,
            mode: SessionMode::Mode1,
            scene: Some(scenario.scene.clone()),
            tasks: scenario.scene.tasks.clone(),
            human: start,
            robot: start,
        })];
        out.extend(session.drive_mode1()?);
        Ok((session, out))
    }

    /// Starts a mode-2 session. With `human: None` the human moves only
    /// through `human_move` messages.
    pub fn mode2(
        id: u64,
        layout: &Layout,
        human: Option<&ScriptedHuman>,
        policy: RobotPolicy,
        options: &Mode2Options,
    ) -> Result<(Self, Vec<SessionMessage>), SimError> {
        let sim = Mode2Sim::new(layout, human, policy, options)?;
        let mut session = Session::with_engine(
            id,
            Engine::Mode2 {
                sim: Box::new(sim),
                teleoperated: human.is_none(),
                human_to: None,
            },
        );
        let out = vec![
            session.emit(Message::ScenarioLoaded {
                session: id,
                mode: SessionMode::Mode2,
                scene: None,
                tasks: layout.tasks.clone(),
                human: layout.human_start,
                robot: layout.robot_start,
            }),
            session.emit(Message::StateUpdate {
                t: 0.0,
                human: layout.human_start,
                robot: layout.robot_start,
                completed: Vec::new(),
                path: vec![layout.robot_start],
            }),
        ];
        Ok((session, out))
    }

    fn with_engine(id: u64, engine: Engine) -> Self {
        Session {
            id,
            next_seq: 1,
            last_client_seq: None,
            answered: BTreeSet::new(),
            pending: None,
            engine,
            ended: false,
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn mode(&self) -> SessionMode {
        match self.engine {
            Engine::Mode1 { .. } => SessionMode::Mode1,
            Engine::Mode2 { .. } => SessionMode::Mode2,
        }
    }

    pub fn is_ended(&self) -> bool {
        self.ended
    }

    /// Seq of the query awaiting an answer.
    pub fn pending_query(&self) -> Option<u64> {
        self.pending.map(|p| p.seq)
    }

    pub fn mode1_result(&self) -> Option<&Mode1Result> {
        match &self.engine {
            Engine::Mode1 { result, .. } => result.as_deref(),
            Engine::Mode2 { .. } => None,
        }
    }

    pub fn episode_log(&self) -> Option<EpisodeLog> {
        match &self.engine {
            Engine::Mode2 { sim, .. } => Some(sim.log()),
            Engine::Mode1 { .. } => None,
        }
    }

    fn emit(&mut self, body: Message) -> SessionMessage {
        let seq = self.next_seq;
        self.next_seq += 1;
        SessionMessage::new(seq, body)
    }

    fn reject(&mut self, msg: &SessionMessage, err: &ProtocolError) -> SessionMessage {
        let body = Message::Error {
            message: err.to_string(),
            in_reply_to: msg.seq,
        };
        self.emit(body)
    }

    /// Handles one client message. A rejected message leaves the episode
    /// untouched and yields a single `error`.
    pub fn handle_message(&mut self, msg: &SessionMessage) -> Vec<SessionMessage> {
        if let Err(err) = self.check(msg) {
            return vec![self.reject(msg, &err)];
        }
        let result = match &msg.body {
            Message::AnswerTarget {
                in_reply_to,
                object,
            } => self.answer_target(*in_reply_to, object),
            Message::AnswerTraversability {
                in_reply_to,
                answers,
            } => self.answer_traversability(*in_reply_to, answers),
            Message::HumanMove { pos } => {
                if let Engine::Mode2 { human_to, .. } = &mut self.engine {
                    *human_to = Some(*pos);
                }
                Ok(Vec::new())
            }
            _ => unreachable!("checked above"),
        };
        match result {
            Ok(out) => {
                if let Some(seq) = msg.seq {
                    self.last_client_seq = Some(seq);
                }
                out
            }
            Err(err) => vec![self.reject(msg, &err)],
        }
    }

    /// Everything that can be rejected without touching the episode.
    fn check(&self, msg: &SessionMessage) -> Result<(), ProtocolError> {
        if let (Some(seq), Some(last)) = (msg.seq, self.last_client_seq) {
            if seq <= last {
                return Err(ProtocolError::StaleSeq { seq, last });
            }
        }
        let kind = msg.body.kind();
        let mode = self.mode();
        let (in_reply_to, want) = match &msg.body {
            Message::AnswerTarget { in_reply_to, .. } => (*in_reply_to, QueryKind::Target),
            Message::AnswerTraversability { in_reply_to, .. } => {
                (*in_reply_to, QueryKind::Traversability)
            }
            Message::HumanMove { .. } => {
                let Engine::Mode2 { teleoperated, .. } = &self.engine else {
                    return Err(ProtocolError::WrongMode { kind, mode });
                };
                if self.ended {
                    return Err(ProtocolError::EpisodeOver);
                }
                if !teleoperated {
                    return Err(ProtocolError::ScriptedHuman);
                }
                return Ok(());
            }
            _ => return Err(ProtocolError::ServerOnly(kind)),
        };
        if mode != SessionMode::Mode1 {
            return Err(ProtocolError::WrongMode { kind, mode });
        }
        if self.answered.contains(&in_reply_to) {
            return Err(ProtocolError::DuplicateAnswer(in_reply_to));
        }
        let pending = self.pending.ok_or(ProtocolError::NoPendingQuery)?;
        if pending.seq != in_reply_to {
            return Err(ProtocolError::WrongReply {
                expected: pending.seq,
                got: in_reply_to,
            });
        }
        if pending.kind != want {
            return Err(ProtocolError::WrongAnswerKind(kind));
        }
        Ok(())
    }

    fn answer_target(
        &mut self,
        seq: u64,
        object: &str,
    ) -> Result<Vec<SessionMessage>, ProtocolError> {
        let Engine::Mode1 { run, .. } = &mut self.engine else {
            unreachable!("checked above");
        };
        run.answer_target(object)
            .map_err(|e| ProtocolError::InvalidAnswer(e.to_string()))?;
        self.settle(seq)
    }

    fn answer_traversability(
        &mut self,
        seq: u64,
        answers: &std::collections::BTreeMap<String, bool>,
    ) -> Result<Vec<SessionMessage>, ProtocolError> {
        let Engine::Mode1 { run, .. } = &mut self.engine else {
            unreachable!("checked above");
        };
        run.answer_traversability(answers)
            .map_err(|e| ProtocolError::InvalidAnswer(e.to_string()))?;
        self.settle(seq)
    }

    fn settle(&mut self, seq: u64) -> Result<Vec<SessionMessage>, ProtocolError> {
        self.answered.insert(seq);
        self.pending = None;
        match self.drive_mode1() {
            Ok(out) => Ok(out),
            Err(e) => {
                self.ended = true;
                let t = 0.0;
                Ok(vec![self.emit(Message::EpisodeEnd {
                    status: EndStatus::Failed,
                    reason: Some(e.to_string()),
                    t,
                    path: Vec::new(),
                })])
            }
        }
    }

    /// Runs the mode-1 planner to its next question or to the end.
    fn drive_mode1(&mut self) -> Result<Vec<SessionMessage>, SimError> {
        let Engine::Mode1 { run, result } = &mut self.engine else {
            return Ok(Vec::new());
        };
        let start = run.scene().start;
        let (body, kind) = match run.advance()? {
            Mode1Event::QueryTarget {
                description,
                question,
                candidates,
            } => (
                Message::QueryTarget {
                    description,
                    question,
                    candidates,
                },
                QueryKind::Target,
            ),
            Mode1Event::QueryTraversability { objects } => (
                Message::QueryTraversability { objects },
                QueryKind::Traversability,
            ),
            Mode1Event::Finished(done) => {
                let path = done.waypoints.clone();
                let (status, reason) = match &done.outcome {
                    Mode1Outcome::Planned => (EndStatus::Planned, None),
                    Mode1Outcome::Failed { reason } => (EndStatus::Failed, Some(reason.clone())),
                };
                *result = Some(done);
                self.ended = true;
                return Ok(vec![
                    self.emit(Message::StateUpdate {
                        t: 0.0,
                        human: start,
                        robot: start,
                        completed: Vec::new(),
                        path: path.clone(),
                    }),
                    self.emit(Message::EpisodeEnd {
                        status,
                        reason,
                        t: 0.0,
                        path,
                    }),
                ]);
            }
        };
        let msg = self.emit(body);
        self.pending = Some(PendingQuery {
            seq: msg.seq.expect("server messages carry seq"),
            kind,
        });
        Ok(vec![msg])
    }

    /// Advances a mode-2 episode by one tick, using the latest `human_move`.
    /// Mode-1 sessions and finished episodes produce nothing.
    pub fn tick(&mut self) -> Vec<SessionMessage> {
        if self.ended {
            return Vec::new();
        }
        let Engine::Mode2 { sim, human_to, .. } = &mut self.engine else {
            return Vec::new();
        };
        let record = match sim.step(human_to.take()) {
            Ok(r) => r.clone(),
            Err(e) => {
                self.ended = true;
                let t = sim.time();
                return vec![self.emit(Message::EpisodeEnd {
                    status: EndStatus::Failed,
                    reason: Some(e.to_string()),
                    t,
                    path: Vec::new(),
                })];
            }
        };
        let target = sim
            .layout()
            .tasks
            .iter()
            .find(|t| t.id == record.decision.target)
            .map(|t| t.position);
        let completed: Vec<String> = sim.completed().iter().cloned().collect();
        let status = if sim.is_finished() {
            Some(EndStatus::Completed)
        } else if sim.out_of_ticks() {
            Some(EndStatus::OutOfTicks)
        } else {
            None
        };
        let trail: Vec<Point> = sim.ticks().iter().map(|r| r.robot).collect();

        let mut out = vec![
            self.emit(Message::StateUpdate {
                t: record.t,
                human: record.human,
                robot: record.robot,
                completed,
                path: std::iter::once(record.robot).chain(target).collect(),
            }),
            self.emit(Message::BeliefUpdate {
                probs: record.belief.iter().cloned().collect(),
                top: record.top.clone(),
                rho: record.rho,
            }),
            self.emit(Message::RobotDecision {
                target: record.decision.target.clone(),
                mode: record.decision.mode,
                released: record.decision.released.clone(),
            }),
        ];
        if let Some(status) = status {
            self.ended = true;
            out.push(self.emit(Message::EpisodeEnd {
                status,
                reason: None,
                t: record.t,
                path: trail,
            }));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{bundled_layouts, worked_example};

    fn answer(in_reply_to: u64, passable: bool, seq: Option<u64>) -> SessionMessage {
        SessionMessage {
            seq,
            body: Message::AnswerTraversability {
                in_reply_to,
                answers: [("o1".to_string(), passable)].into(),
            },
        }
    }

    #[test]
    fn worked_example_over_the_wire() {
        let (mut s, out) = Session::mode1(
            1,
            &worked_example(),
            Strategy::Optimal,
            Mode1Options::default(),
        )
        .unwrap();
        assert_eq!(out[0].body.kind(), "scenario_loaded");
        let q = out.last().unwrap();
        assert_eq!(
            q.body,
            Message::QueryTraversability {
                objects: vec!["o1".into()]
            }
        );
        let q_seq = q.seq.unwrap();

        let done = s.handle_message(&answer(q_seq, true, Some(1)));
        let kinds: Vec<&str> = done.iter().map(|m| m.body.kind()).collect();
        assert_eq!(kinds, ["state_update", "episode_end"]);
        assert!(s.is_ended());

        let before = s.mode1_result().cloned();
        let replay = s.handle_message(&answer(q_seq, true, Some(2)));
        assert_eq!(replay.len(), 1);
        assert_eq!(replay[0].body.kind(), "error");
        assert_eq!(s.mode1_result().cloned(), before);
    }

    #[test]
    fn stale_seq_changes_nothing() {
        let (mut s, out) = Session::mode1(
            1,
            &worked_example(),
            Strategy::Optimal,
            Mode1Options::default(),
        )
        .unwrap();
        let q_seq = out.last().unwrap().seq.unwrap();
        let bogus = s.handle_message(&answer(q_seq + 5, true, Some(4)));
        assert_eq!(bogus[0].body.kind(), "error");
        // A rejected message does not consume its seq.
        let stale = s.handle_message(&answer(q_seq, true, Some(4)));
        assert_eq!(stale[0].body.kind(), "state_update");
        let again = s.handle_message(&answer(q_seq, true, Some(3)));
        assert!(matches!(
            again[0].body,
            Message::Error {
                in_reply_to: Some(3),
                ..
            }
        ));
    }

    #[test]
    fn human_move_in_mode1_is_an_error() {
        let (mut s, _) = Session::mode1(
            1,
            &worked_example(),
            Strategy::Optimal,
            Mode1Options::default(),
        )
        .unwrap();
        let pending = s.pending_query();
        let out = s.handle_message(&SessionMessage::unsequenced(Message::HumanMove {
            pos: Point::new(1.0, 1.0),
        }));
        assert_eq!(out[0].body.kind(), "error");
        assert_eq!(s.pending_query(), pending);
    }

    #[test]
    fn teleoperated_human_moves_on_tick() {
        let layout = &bundled_layouts()[0];
        let (mut s, _) = Session::mode2(
            2,
            layout,
            None,
            RobotPolicy::Intent,
            &Mode2Options::default(),
        )
        .unwrap();
        let goal = layout.tasks[0].position;
        s.handle_message(&SessionMessage::unsequenced(Message::HumanMove {
            pos: Point::new(9.0, 9.0),
        }));
        s.handle_message(&SessionMessage::unsequenced(Message::HumanMove {
            pos: goal,
        }));
        let out = s.tick();
        let kinds: Vec<&str> = out.iter().map(|m| m.body.kind()).collect();
        assert_eq!(
            &kinds[..3],
            ["state_update", "belief_update", "robot_decision"]
        );
        let Message::StateUpdate {
            human, completed, ..
        } = &out[0].body
        else {
            panic!()
        };
        assert_eq!(*human, goal);
        assert_eq!(completed, &vec![layout.tasks[0].id.clone()]);
    }

    #[test]
    fn seqs_increase() {
        let layout = &bundled_layouts()[0];
        let human = ScriptedHuman::rational(layout.plans[0].clone());
        let (mut s, mut all) = Session::mode2(
            2,
            layout,
            Some(&human),
            RobotPolicy::Intent,
            &Mode2Options::default(),
        )
        .unwrap();
        while !s.is_ended() {
            all.extend(s.tick());
        }
        assert_eq!(all.last().unwrap().body.kind(), "episode_end");
        assert!(all.windows(2).all(|w| w[0].seq < w[1].seq));
        assert!(s.tick().is_empty());
    }
}
