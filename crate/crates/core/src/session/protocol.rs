//! Wire messages. One JSON object per line, tagged by `kind`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::coordination::DecisionMode;
use crate::world::{Point, SemanticScene, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionMode {
    Mode1,
    Mode2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndStatus {
    /// Mode 1: a path was planned.
    Planned,
    /// Mode 1: planning failed.
    Failed,
    /// Mode 2: every task completed.
    Completed,
    /// Mode 2: tick budget ran out.
    OutOfTicks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Message {
    ScenarioLoaded {
        session: u64,
        mode: SessionMode,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scene: Option<SemanticScene>,
        tasks: Vec<Task>,
        human: Point,
        robot: Point,
    },
    StateUpdate {
        t: f64,
        human: Point,
        robot: Point,
        completed: Vec<String>,
        path: Vec<Point>,
    },
    BeliefUpdate {
        probs: BTreeMap<String, f64>,
        top: String,
        rho: f64,
    },
    RobotDecision {
        target: String,
        mode: DecisionMode,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        released: Option<String>,
    },
    QueryTarget {
        description: String,
        question: String,
        candidates: Vec<String>,
    },
    AnswerTarget {
        in_reply_to: u64,
        object: String,
    },
    QueryTraversability {
        objects: Vec<String>,
    },
    AnswerTraversability {
        in_reply_to: u64,
        answers: BTreeMap<String, bool>,
    },
    HumanMove {
        pos: Point,
    },
    EpisodeEnd {
        status: EndStatus,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reason: Option<String>,
        t: f64,
        path: Vec<Point>,
    },
    Error {
        message: String,
        /// Seq of the message that was rejected, when it had one.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        in_reply_to: Option<u64>,
    },
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::ScenarioLoaded { .. } => "scenario_loaded",
            Message::StateUpdate { .. } => "state_update",
            Message::BeliefUpdate { .. } => "belief_update",
            Message::RobotDecision { .. } => "robot_decision",
            Message::QueryTarget { .. } => "query_target",
            Message::AnswerTarget { .. } => "answer_target",
            Message::QueryTraversability { .. } => "query_traversability",
            Message::AnswerTraversability { .. } => "answer_traversability",
            Message::HumanMove { .. } => "human_move",
            Message::EpisodeEnd { .. } => "episode_end",
            Message::Error { .. } => "error",
        }
    }
}

/// A message plus its sequence number. Server messages always carry one;
/// client messages may omit it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMessage {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seq: Option<u64>,
    #[serde(flatten)]
    pub body: Message,
}

impl SessionMessage {
    pub fn new(seq: u64, body: Message) -> Self {
        SessionMessage {
            seq: Some(seq),
            body,
        }
    }

    pub fn unsequenced(body: Message) -> Self {
        SessionMessage { seq: None, body }
    }

    /// One line of JSON, without the newline.
    pub fn encode(&self) -> String {
        serde_json::to_string(self).expect("messages serialize")
    }

    pub fn decode(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }
}
