//! Episode runners, scripted humans, metrics and benchmark suites.

mod bundled;
mod metrics;
mod mode1;
mod mode2;
mod suite;

pub use bundled::{
    bundled_layout, bundled_layouts, bundled_mode1_suite, real_world_replica, worked_example,
};
pub use metrics::{
    compute_metrics, expected_remaining_distance, mean_se, MeanSe, Metrics, Mode1Metrics,
};
pub use mode1::{
    check_path, drive_mode1, run_mode1_episode, LegRecord, Mode1Event, Mode1Options, Mode1Outcome,
    Mode1Report, Mode1Result, Mode1Run, Strategy,
};
pub use mode2::{
    run_mode2_episode, Behavior, EpisodeLog, Layout, Mode2Options, Mode2Sim, RobotPolicy,
    ScriptedHuman, TickRecord,
};
pub use suite::{run_suite, Mode1Row, Mode2Row, SuiteReport, SuiteSpec};

use thiserror::Error;

use crate::coordination::CoordinationError;
use crate::grounding::GroundingError;
use crate::intent::IntentError;
use crate::policy::PolicyError;
use crate::tree::TreeError;
use crate::world::WorldError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Grounding(#[from] GroundingError),
    #[error(transparent)]
    Intent(#[from] IntentError),
    #[error(transparent)]
    Coordination(#[from] CoordinationError),
    #[error("scenario and answer key disagree: {0}")]
    AnswerKeyMismatch(String),
    #[error("ground truth missing for \"{0}\"")]
    MissingGroundTruth(String),
    #[error("unexpected input: {0}")]
    UnexpectedInput(String),
    #[error("tick budget of {0} exhausted")]
    TickBudgetExceeded(usize),
    #[error("invalid option: {0}")]
    InvalidOption(String),
}
